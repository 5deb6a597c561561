#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "stein/errors.hpp"

namespace stein::csv {

// 17 significant digits: doubles round-trip exactly through the file.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw domain_error("cannot open output file: " + path);
    out << content;
    if (!out) throw domain_error("failed writing output file: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw domain_error("cannot open file: " + path);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

}  // namespace stein::csv
