#pragma once

#include <map>
#include <string>
#include <vector>

namespace dte {

// Flat key=value config document; '#' comments. Precedence handling (flags
// over file over defaults) lives in the CLI.
std::map<std::string, std::string> parse_config(const std::string& text);
std::map<std::string, std::string> parse_config_file(const std::string& path);

// "# key=value" comment header echoing the resolved configuration, prepended
// to every output file for reproducibility.
std::string config_header(const std::map<std::string, std::string>& kv);

void write_file(const std::string& path, const std::string& content);

}  // namespace dte
