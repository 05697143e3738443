#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ska/taskgen.hpp"

namespace ska {

nlohmann::json episode_to_json(const Episode& e);
Episode episode_from_json(const nlohmann::json& j);

// One episode per line, UTF-8, no trailing whitespace.
void write_jsonl(const std::string& path, const std::vector<Episode>& episodes);

// Throws ParseError with a line number on malformed input, IoError on missing
// or unreadable files.
std::vector<Episode> read_jsonl(const std::string& path);

void write_report(const std::string& path, const nlohmann::json& report);

}  // namespace ska
