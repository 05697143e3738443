#pragma once

#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ska/engine.hpp"

namespace ska {

struct CellAccuracy {
  long episodes = 0;
  long queries = 0;
  long correct = 0;
  double accuracy = 0.0;
};

// Grid-cell label derived from episode content: MQAR and NIAH report their
// kv/gap or kv/len cell, the rest report their tier.
inline std::string cell_label(const Episode& e) {
  long anchors = 0;
  for (auto b : e.mask) anchors += b;
  const long t = static_cast<long>(e.tokens.size());
  switch (e.family) {
    case Family::mqar: {
      const long kv = anchors;
      return "kv" + std::to_string(kv) + "-gap" + std::to_string(t - 4 * kv);
    }
    case Family::niah:
      return "kv" + std::to_string(anchors) + "-len" + std::to_string(t - 2);
    case Family::multihop:
      return "kv" + std::to_string(anchors / 6) + "-len" + std::to_string(t - 2);
    case Family::commonword:
      return "len" + std::to_string(t - 1);
    default:
      return tier_name(e.tier);
  }
}

// Episode-parallel evaluation; results are aggregated in episode-index order
// so the summary is identical for any worker count.
template <class Scalar>
std::map<std::string, std::map<std::string, CellAccuracy>> evaluate_dataset(
    const std::vector<Episode>& episodes, const EmbeddingScheme<Scalar>& scheme,
    const SkaConfig& cfg, StatsMode mode, int workers) {
  if (workers < 1) workers = 1;
  struct PerEpisode {
    long queries = 0;
    long correct = 0;
  };
  std::vector<PerEpisode> per(episodes.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= episodes.size()) return;
      try {
        auto outcomes = run_parallel(episodes[i], scheme, cfg, mode);
        per[i].queries = static_cast<long>(outcomes.size());
        for (const auto& o : outcomes) per[i].correct += o.correct ? 1 : 0;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::map<std::string, std::map<std::string, CellAccuracy>> summary;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    CellAccuracy& cell = summary[family_name(episodes[i].family)][cell_label(episodes[i])];
    cell.episodes += 1;
    cell.queries += per[i].queries;
    cell.correct += per[i].correct;
  }
  for (auto& [fam, cells] : summary) {
    for (auto& [label, cell] : cells) {
      cell.accuracy = cell.queries > 0
                          ? static_cast<double>(cell.correct) / cell.queries
                          : 0.0;
    }
  }
  return summary;
}

}  // namespace ska
