// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#pragma once

#include <string>
#include <vector>

namespace codiemb::report {

// Fixed-precision decimal rendering (deterministic across runs).
std::string fmt_double(double x, int precision = 4);

std::string format_table(const std::vector<std::string>& headers,
                         const std::vector<std::vector<std::string>>& rows);

std::string to_csv(const std::vector<std::string>& headers,
                   const std::vector<std::vector<std::string>>& rows);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace codiemb::report
