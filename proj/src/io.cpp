#include "ska/io.hpp"

#include <fstream>

namespace ska {

nlohmann::json episode_to_json(const Episode& e) {
  nlohmann::json queries = nlohmann::json::array();
  for (const Query& q : e.queries) {
    queries.push_back({{"pos", q.pos}, {"answer", q.answer}});
  }
  return nlohmann::json{{"family", family_name(e.family)},
                        {"tier", tier_name(e.tier)},
                        {"seed", e.seed},
                        {"tokens", e.tokens},
                        {"mask", e.mask},
                        {"queries", queries}};
}

Episode episode_from_json(const nlohmann::json& j) {
  Episode e;
  e.family = family_from_name(j.at("family").get<std::string>());
  e.tier = tier_from_name(j.at("tier").get<std::string>());
  e.seed = j.at("seed").get<std::uint64_t>();
  e.tokens = j.at("tokens").get<std::vector<int>>();
  e.mask = j.at("mask").get<std::vector<std::uint8_t>>();
  for (const auto& q : j.at("queries")) {
    e.queries.push_back(
        {q.at("pos").get<int>(), q.at("answer").get<std::vector<int>>()});
  }
  if (e.mask.size() != e.tokens.size()) {
    throw ParseError("episode: mask length != token count");
  }
  for (const Query& q : e.queries) {
    if (q.pos < 0 || q.pos >= static_cast<int>(e.tokens.size())) {
      throw ParseError("episode: query position out of range");
    }
  }
  return e;
}

void write_jsonl(const std::string& path, const std::vector<Episode>& episodes) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const Episode& e : episodes) {
    out << episode_to_json(e).dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<Episode> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<Episode> episodes;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      episodes.push_back(episode_from_json(nlohmann::json::parse(line)));
    } catch (const ParseError& err) {
      throw ParseError("line " + std::to_string(line_no) + ": " + err.what());
    } catch (const nlohmann::json::exception& err) {
      throw ParseError("line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  return episodes;
}

void write_report(const std::string& path, const nlohmann::json& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << report.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace ska
