#include <chrono>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ska/engine.hpp"
#include "ska/eval.hpp"
#include "ska/io.hpp"
#include "ska/taskgen.hpp"
#include "ska/theory.hpp"

namespace {

using nlohmann::json;

struct CommonFlags {
  int rank = 32;
  int head_dim = 32;
  double eps = 1e-3;
  int k = 0;
  double gamma = 1.0;
  double eta = 1.5;
  int chunk = 64;
  bool fp32 = false;

  ska::SkaConfig to_config() const {
    ska::SkaConfig cfg;
    cfg.rank_r = rank;
    cfg.head_dim_p = head_dim;
    cfg.ridge_eps = eps;
    cfg.power_k = k;
    cfg.gamma = gamma;
    cfg.eta = eta;
    cfg.chunk_size_s = chunk;
    cfg.validate();
    return cfg;
  }

  json to_json() const {
    return json{{"rank", rank},   {"head_dim", head_dim}, {"eps", eps},
                {"k", k},         {"gamma", gamma},       {"eta", eta},
                {"chunk", chunk}, {"fp32", fp32}};
  }
};

void add_config_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--rank", flags.rank, "projection rank r");
  cmd->add_option("--head-dim", flags.head_dim, "value head dimension P");
  cmd->add_option("--eps", flags.eps, "ridge regularization");
  cmd->add_option("--k", flags.k, "power filter order K");
  cmd->add_option("--gamma", flags.gamma, "spectral restoration scale");
  cmd->add_option("--eta", flags.eta, "output scale");
  cmd->add_option("--chunk", flags.chunk, "chunk size S");
  cmd->add_flag("--fp32", flags.fp32, "run the engine in 32-bit floats");
}

std::vector<ska::Episode> generate(const std::string& family, const std::string& tier,
                                   int kv, int gap, int seq_len, int n,
                                   std::uint64_t seed) {
  const ska::Family fam = ska::family_from_name(family);
  const ska::Tier t = ska::tier_from_name(tier);
  std::vector<ska::Episode> eps;
  eps.reserve(n);
  for (int i = 0; i < n; ++i) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    switch (fam) {
      case ska::Family::mqar: eps.push_back(ska::gen_mqar(kv, gap, s)); break;
      case ska::Family::niah: eps.push_back(ska::gen_niah(kv, seq_len, s)); break;
      case ska::Family::multihop: eps.push_back(ska::gen_multihop(kv, seq_len, s)); break;
      case ska::Family::commonword: eps.push_back(ska::gen_commonword(seq_len, s)); break;
      case ska::Family::tooltrace: eps.push_back(ska::gen_tooltrace(t, s)); break;
      case ska::Family::economy: eps.push_back(ska::gen_economy(t, s)); break;
      case ska::Family::sysprompt_cot:
        eps.push_back(ska::gen_sysprompt(ska::SyspromptSubtask::cot, t, s));
        break;
      case ska::Family::sysprompt_specific:
        eps.push_back(ska::gen_sysprompt(ska::SyspromptSubtask::specific, t, s));
        break;
    }
  }
  return eps;
}

template <class Scalar>
json run_dataset(const std::vector<ska::Episode>& episodes, const CommonFlags& flags,
                 const std::string& mode, const std::string& scheme_name,
                 std::uint64_t seed, int workers) {
  const ska::SkaConfig cfg = flags.to_config();
  auto scheme = ska::make_scheme<Scalar>(ska::scheme_from_name(scheme_name),
                                         cfg.rank_r, cfg.head_dim_p, seed);
  const auto t0 = std::chrono::steady_clock::now();
  auto summary = ska::evaluate_dataset<Scalar>(episodes, scheme, cfg,
                                               ska::mode_from_name(mode), workers);
  const auto t1 = std::chrono::steady_clock::now();

  json results = json::object();
  for (const auto& [family, cells] : summary) {
    json fam = json::object();
    for (const auto& [label, cell] : cells) {
      fam[label] = json{{"n", cell.episodes},
                        {"queries", cell.queries},
                        {"correct", cell.correct},
                        {"accuracy", cell.accuracy}};
    }
    results[family] = fam;
  }
  json report;
  report["config"] = flags.to_json();
  report["config"]["mode"] = mode;
  report["config"]["scheme"] = scheme_name;
  report["config"]["seed"] = seed;
  report["config"]["workers"] = workers;
  report["results"] = results;
  report["state_floats"] = ska::state_float_count(cfg.rank_r, cfg.head_dim_p);
  report["state_bytes"] = static_cast<long>(sizeof(Scalar)) *
                          ska::state_float_count(cfg.rank_r, cfg.head_dim_p);
  report["wall_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
  return report;
}

json bound_report_json(const ska::BoundReport& r) {
  return json{{"name", r.name},
              {"lhs", r.lhs},
              {"rhs", r.rhs},
              {"satisfied", r.satisfied},
              {"margin", r.margin},
              {"trials", r.trials}};
}

// Synthetic recurrent decode loop for benchmarking: per step, update the
// statistics, re-estimate the operator, retrieve once.
double per_step_micros(int rank, int head_dim, long t_len, std::uint64_t seed) {
  ska::SkaConfig cfg;
  cfg.rank_r = rank;
  cfg.head_dim_p = head_dim;
  cfg.power_k = 2;
  ska::SufficientStats<double> stats(rank, head_dim);

  std::vector<ska::Vectord> keys, values;
  const int pool = 257;
  for (int i = 0; i < pool; ++i) {
    keys.push_back(ska::detail::seeded_unit_vector<double>(rank, seed + i));
    values.push_back(ska::detail::seeded_unit_vector<double>(head_dim, seed + 7919 + i));
  }

  volatile double sink = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (long t = 0; t < t_len; ++t) {
    ska::accumulate_step(stats, keys[t % pool], values[t % pool]);
    auto op = ska::estimate(stats, cfg);
    ska::Vectord y = ska::retrieve_ska(op, keys[(t + 1) % pool]);
    sink = sink + y[0];
  }
  const auto t1 = std::chrono::steady_clock::now();
  (void)sink;
  return std::chrono::duration<double, std::micro>(t1 - t0).count() /
         static_cast<double>(t_len);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"constant-memory spectral retrieval toolkit"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate synthetic retrieval episodes");
  std::string family, tier = "easy", out_path;
  int kv = 8, gap = 256, seq_len = 256, n = 100;
  std::uint64_t seed = 1;
  gen->add_option("--family", family, "task family")->required();
  gen->add_option("--tier", tier, "easy|hard");
  gen->add_option("--kv", kv, "key-value pair count");
  gen->add_option("--gap", gap, "distractor gap length");
  gen->add_option("--seq-len", seq_len, "body sequence length");
  gen->add_option("--n", n, "episode count");
  gen->add_option("--seed", seed, "base seed (episode i uses seed+i)");
  gen->add_option("--out", out_path, "output JSONL path")->required();

  // run
  auto* run = app.add_subcommand("run", "evaluate retrieval over a dataset");
  CommonFlags run_flags;
  std::string in_path, run_out, mode = "masked", scheme = "orthogonal";
  int workers = 1;
  std::uint64_t run_seed = 1;
  run->add_option("--in", in_path, "input JSONL dataset")->required();
  run->add_option("--out", run_out, "report path (default stdout)");
  run->add_option("--mode", mode, "prefix|masked|chunk-causal");
  run->add_option("--scheme", scheme, "orthogonal|gaussian");
  run->add_option("--workers", workers, "episode evaluation workers");
  run->add_option("--seed", run_seed, "embedding scheme seed");
  add_config_flags(run, run_flags);

  // verify
  auto* verify = app.add_subcommand("verify", "run the numerical bound suite");
  std::string only, verify_out;
  std::uint64_t verify_seed = 42;
  bool inject_fault = false;
  verify->add_option("--only", only, "run only checks whose name contains this");
  verify->add_option("--seed", verify_seed, "suite seed");
  verify->add_option("--out", verify_out, "report path (default stdout)");
  verify->add_flag("--inject-fault", inject_fault, "test hook: add a failing check")
      ->group("");  // hidden

  // spectrum
  auto* spectrum = app.add_subcommand("spectrum", "per-episode operator diagnostics");
  CommonFlags spec_flags;
  std::string spec_in, spec_out, spec_mode = "masked", spec_scheme = "orthogonal";
  std::uint64_t spec_seed = 1;
  spectrum->add_option("--in", spec_in, "input JSONL dataset")->required();
  spectrum->add_option("--out", spec_out, "report path (default stdout)");
  spectrum->add_option("--mode", spec_mode, "prefix|masked|chunk-causal");
  spectrum->add_option("--scheme", spec_scheme, "orthogonal|gaussian");
  spectrum->add_option("--seed", spec_seed, "embedding scheme seed");
  add_config_flags(spectrum, spec_flags);

  // bench
  auto* bench = app.add_subcommand("bench", "per-step cost and state-size scaling");
  CommonFlags bench_flags;
  bench_flags.rank = 24;
  std::string bench_out;
  bench->add_option("--out", bench_out, "report path (default stdout)");
  add_config_flags(bench, bench_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) {
      auto episodes = generate(family, tier, kv, gap, seq_len, n, seed);
      ska::write_jsonl(out_path, episodes);
      std::cout << "wrote " << episodes.size() << " episodes to " << out_path << "\n";
      return 0;
    }

    if (run->parsed()) {
      auto episodes = ska::read_jsonl(in_path);
      if (episodes.empty()) throw ska::InvalidParams("dataset is empty: " + in_path);
      json report = run_flags.fp32
                        ? run_dataset<float>(episodes, run_flags, mode, scheme,
                                             run_seed, workers)
                        : run_dataset<double>(episodes, run_flags, mode, scheme,
                                              run_seed, workers);
      if (run_out.empty()) {
        std::cout << report.dump(2) << "\n";
      } else {
        ska::write_report(run_out, report);
      }
      return 0;
    }

    if (verify->parsed()) {
      auto reports = ska::run_bound_suite(verify_seed);
      if (inject_fault) {
        reports.push_back(ska::make_report("injected-fault", 1.0, 0.0, 1));
      }
      json out = json::array();
      bool all_ok = true;
      for (const auto& r : reports) {
        if (!only.empty() && r.name.find(only) == std::string::npos) continue;
        out.push_back(bound_report_json(r));
        all_ok = all_ok && r.satisfied;
        std::cout << (r.satisfied ? "[PASS] " : "[FAIL] ") << r.name
                  << "  lhs=" << r.lhs << " rhs=" << r.rhs << " trials=" << r.trials
                  << "\n";
      }
      if (out.empty()) {
        throw ska::InvalidParams("no check matches --only " + only);
      }
      if (!verify_out.empty()) {
        ska::write_report(verify_out, json{{"seed", verify_seed}, {"checks", out}});
      }
      return all_ok ? 0 : 1;
    }

    if (spectrum->parsed()) {
      auto episodes = ska::read_jsonl(spec_in);
      if (episodes.empty()) throw ska::InvalidParams("dataset is empty: " + spec_in);
      const ska::SkaConfig cfg = spec_flags.to_config();
      auto sch = ska::make_scheme<double>(ska::scheme_from_name(spec_scheme),
                                          cfg.rank_r, cfg.head_dim_p, spec_seed);
      const ska::StatsMode m = ska::mode_from_name(spec_mode);
      json per_episode = json::array();
      for (const auto& e : episodes) {
        auto feats = ska::detail::embed_episode(e, sch);
        ska::SufficientStats<double> stats(cfg.rank_r, cfg.head_dim_p);
        for (std::size_t t = 0; t < feats.keys.size(); ++t) {
          if (m == ska::StatsMode::masked && !e.mask[t]) continue;
          ska::accumulate_step(stats, feats.keys[t], feats.values[t]);
        }
        auto op = ska::estimate(stats, cfg);
        ska::Matrixd gt = stats.g();
        gt.diagonal().array() += cfg.ridge_eps;
        Eigen::SelfAdjointEigenSolver<ska::Matrixd> es(gt);
        const double lmin = es.eigenvalues().minCoeff();
        const double lmax = es.eigenvalues().maxCoeff();
        auto moduli = ska::eigenvalue_moduli(op.a_hat);
        std::vector<long> hist(16, 0);
        for (double v : moduli) {
          hist[std::min<std::size_t>(15, static_cast<std::size_t>(v * 10.0))]++;
        }
        per_episode.push_back(json{{"lambda_min", lmin},
                                   {"lambda_max", lmax},
                                   {"kappa", lmax / lmin},
                                   {"sigma_max_raw", op.sigma_max_raw},
                                   {"modulus_histogram", hist}});
      }
      json report{{"config", spec_flags.to_json()}, {"episodes", per_episode}};
      report["config"]["mode"] = spec_mode;
      if (spec_out.empty()) {
        std::cout << report.dump(2) << "\n";
      } else {
        ska::write_report(spec_out, report);
      }
      return 0;
    }

    if (bench->parsed()) {
      auto median_us = [](int rank, int head_dim, long t_len, int reps) {
        per_step_micros(rank, head_dim, std::max(64L, t_len / 4), 7);  // warmup
        std::vector<double> xs;
        for (int rep = 0; rep < reps; ++rep) {
          xs.push_back(per_step_micros(rank, head_dim, t_len, 1234 + rep));
        }
        std::sort(xs.begin(), xs.end());
        return xs[xs.size() / 2];
      };

      json grid = json::array();
      double t_min = 1e300, t_max = 0.0;
      for (long t_len = 64; t_len <= 8192; t_len *= 2) {
        const int reps = static_cast<int>(std::max(3L, 2048 / t_len));
        const double us = median_us(bench_flags.rank, bench_flags.head_dim, t_len, reps);
        const long bytes = static_cast<long>(sizeof(double)) *
                           ska::state_float_count(bench_flags.rank, bench_flags.head_dim);
        grid.push_back(json{{"T", t_len}, {"per_step_us", us}, {"state_bytes", bytes}});
        t_min = std::min(t_min, us);
        t_max = std::max(t_max, us);
      }
      const double flatness = t_max / t_min;

      const double us_r = median_us(bench_flags.rank, bench_flags.head_dim, 512, 9);
      const double us_2r = median_us(2 * bench_flags.rank, bench_flags.head_dim, 512, 9);

      json report{{"grid", grid},
                  {"flatness_ratio", flatness},
                  {"rank_scaling",
                   json{{"rank", bench_flags.rank},
                        {"per_step_us", us_r},
                        {"rank2x", 2 * bench_flags.rank},
                        {"per_step_us_2x", us_2r},
                        {"ratio", us_2r / us_r}}}};
      if (bench_out.empty()) {
        std::cout << report.dump(2) << "\n";
      } else {
        ska::write_report(bench_out, report);
      }
      if (flatness >= 2.0) {
        std::cerr << "per-step time not flat in T: ratio " << flatness << "\n";
        return 1;
      }
      return 0;
    }
  } catch (const ska::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const ska::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 3;
  } catch (const ska::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
