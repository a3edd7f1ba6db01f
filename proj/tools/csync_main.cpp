#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "csync/errors.hpp"
#include "csync/scenario_config.hpp"
#include "csync/simulation.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kInvalid = 1, kAbort = 2 };

struct Outcome {
  int code = kOk;
  std::string message;
};

Outcome run_one(const fs::path& config, const std::optional<fs::path>& out, std::optional<int> decimate,
                std::optional<std::uint64_t> seed) {
  csync::ScenarioConfig cfg;
  try {
    cfg = csync::load_config(config);
  } catch (const csync::ValidationError& e) {
    return {kInvalid, config.string() + ": invalid: " + e.what()};
  } catch (const csync::ParseError& e) {
    return {kInvalid, config.string() + ": parse error: " + e.what()};
  }
  csync::RunOptions opts;
  opts.out_dir = out ? *out : fs::path(cfg.outputs.directory);
  opts.decimation = decimate;
  opts.seed = seed;
  try {
    const auto res = csync::run_scenario(cfg, opts);
    if (res.aborted) return {kAbort, config.string() + ": aborted: " + res.abort_message};
    return {kOk, config.string() + ": ok (" + std::to_string(res.metrics.steps) + " steps) -> " +
                     opts.out_dir->string()};
  } catch (const csync::ValidationError& e) {
    return {kInvalid, config.string() + ": invalid: " + e.what()};
  } catch (const std::exception& e) {
    return {kAbort, config.string() + ": error: " + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Universal inverter controller scenario runner"};
  app.require_subcommand(1);

  std::string run_cfg, out_dir;
  int decimate = 0;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "Run one scenario");
  run->add_option("config", run_cfg, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  auto* out_opt = run->add_option("--out", out_dir, "Output directory");
  auto* dec_opt = run->add_option("--decimate", decimate, "Write every Nth step")->check(CLI::PositiveNumber);
  auto* seed_opt = run->add_option("--seed", seed, "Measurement-noise seed");

  std::string batch_dir, batch_out;
  int jobs = 0;
  auto* batch = app.add_subcommand("batch", "Run every *.json scenario in a directory");
  batch->add_option("dir", batch_dir, "Directory of scenarios")->required()->check(CLI::ExistingDirectory);
  auto* batch_out_opt = batch->add_option("--out", batch_out, "Parent output directory");
  batch->add_option("-j,--jobs", jobs, "Concurrent workers (default: hardware threads)");

  std::string val_cfg;
  auto* validate = app.add_subcommand("validate", "Check a scenario without running it");
  validate->add_option("config", val_cfg, "Scenario JSON file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  if (*validate) {
    try {
      const auto cfg = csync::load_config(val_cfg);
      std::cout << val_cfg << ": valid (" << cfg.inverters.size() << " inverters, "
                << static_cast<long long>(std::llround(cfg.t_end / cfg.dt)) << " steps)\n";
      return kOk;
    } catch (const csync::Error& e) {
      std::cerr << val_cfg << ": " << e.what() << "\n";
      return kInvalid;
    }
  }

  if (*run) {
    std::optional<fs::path> out;
    if (*out_opt) out = fs::path(out_dir);
    const auto r = run_one(run_cfg, out, *dec_opt ? std::optional<int>(decimate) : std::nullopt,
                           *seed_opt ? std::optional<std::uint64_t>(seed) : std::nullopt);
    (r.code == kOk ? std::cout : std::cerr) << r.message << "\n";
    return r.code;
  }

  std::vector<fs::path> configs;
  for (const auto& e : fs::directory_iterator(batch_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") configs.push_back(e.path());
  }
  std::sort(configs.begin(), configs.end());
  std::vector<Outcome> results(configs.size());
  std::atomic<std::size_t> next{0};
  const unsigned n_workers =
      std::max(1u, std::min<unsigned>(jobs > 0 ? static_cast<unsigned>(jobs) : std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(configs.size())));
  std::mutex io;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < configs.size();) {
      std::optional<fs::path> out;
      if (*batch_out_opt) out = fs::path(batch_out) / configs[i].stem();
      results[i] = run_one(configs[i], out, std::nullopt, std::nullopt);
      std::lock_guard<std::mutex> lock(io);
      (results[i].code == kOk ? std::cout : std::cerr) << results[i].message << "\n";
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  int code = kOk;
  for (const auto& r : results) code = std::max(code, r.code);
  return code;
}
