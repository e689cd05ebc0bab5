#pragma once

#include "errors.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace wgdirac {

// Writes through a temporary file in the same directory, then renames.
inline void atomic_write(const std::filesystem::path& path, const std::string& content)
{
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            fail(ErrorKind::Config, "cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out)
            fail(ErrorKind::Config, "write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::Config, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace wgdirac
