#pragma once

#include <stdexcept>
#include <string>

namespace wgdirac {

enum class ErrorKind {
    Geometry,
    Kernel,
    Domain,
    Assembly,
    LinearAlgebra,
    NoKernel,
    NoBand,
    AmbiguousBracket,
    Refinement,
    AssumptionViolation,
    DegenerateGap,
    StructureViolation,
    SymmetryFailure,
    SwapInconclusive,
    Table,
    PoleRisk,
    NoMode,
    UniquenessViolation,
    Reconstruction,
    Oracle,
    Config
};

inline const char* kind_name(ErrorKind k)
{
    switch (k) {
    case ErrorKind::Geometry: return "geometry";
    case ErrorKind::Kernel: return "kernel";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Assembly: return "assembly";
    case ErrorKind::LinearAlgebra: return "linear-algebra";
    case ErrorKind::NoKernel: return "no-kernel";
    case ErrorKind::NoBand: return "no-band";
    case ErrorKind::AmbiguousBracket: return "ambiguous-bracket";
    case ErrorKind::Refinement: return "refinement";
    case ErrorKind::AssumptionViolation: return "assumption-violation";
    case ErrorKind::DegenerateGap: return "degenerate-gap";
    case ErrorKind::StructureViolation: return "structure-violation";
    case ErrorKind::SymmetryFailure: return "symmetry-failure";
    case ErrorKind::SwapInconclusive: return "swap-inconclusive";
    case ErrorKind::Table: return "table";
    case ErrorKind::PoleRisk: return "pole-risk";
    case ErrorKind::NoMode: return "no-mode";
    case ErrorKind::UniquenessViolation: return "uniqueness-violation";
    case ErrorKind::Reconstruction: return "reconstruction";
    case ErrorKind::Oracle: return "oracle";
    case ErrorKind::Config: return "config";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(kind_name(kind)) + " error: " + what), kind_(kind)
    {
    }
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what)
{
    throw Error(kind, what);
}

} // namespace wgdirac
