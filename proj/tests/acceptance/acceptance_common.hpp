#pragma once

#include <filesystem>
#include <string>

int& acceptance_failures();
void report_line(int criterion, bool pass, const std::string& detail);

void criterion5(const std::filesystem::path& work_dir);
void criterion6(const std::filesystem::path& work_dir);
void criterion7(const std::filesystem::path& work_dir);
