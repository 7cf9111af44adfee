// njtv: groupwise rigid registration of multimodal 3D volumes with the
// normalised joint total variation cost, plus pairwise baselines, a
// degradation simulator and an evaluation harness.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "njtv/njtv.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_register(const std::vector<std::string>& inputs,
                 const std::string& cost_name, const std::string& out_dir,
                 size_t fixed_index, uint64_t seed, const std::string& apply,
                 bool dump_mixtures, bool no_jitter) {
  std::vector<njtv::Volume> vols;
  for (const auto& path : inputs) vols.push_back(njtv::load_nifti(path));

  njtv::RegistrationOptions opts;
  opts.cost = njtv::cost_from_string(cost_name);
  opts.fixed_index = fixed_index;
  opts.jitter_seed = seed;
  opts.jitter = !no_jitter;

  fs::create_directories(out_dir);

  if (dump_mixtures) {
    njtv::json jm = njtv::json::array();
    for (size_t c = 0; c < vols.size(); ++c) {
      const njtv::Histogram h = njtv::build_histogram(vols[c]);
      njtv::json j;
      j["input"] = inputs[c];
      if (h.lo >= 0) {
        const njtv::RicianMixture m = njtv::fit_rician_mixture(h);
        j["model"] = "rician";
        j["background"] = {{"nu", m.background.nu},
                           {"sigma", m.background.sigma},
                           {"weight", m.background.weight}};
        j["foreground"] = {{"nu", m.foreground.nu},
                           {"sigma", m.foreground.sigma},
                           {"weight", m.foreground.weight},
                           {"mean", m.foreground.mean()}};
      } else {
        const njtv::GaussianMixture m = njtv::fit_gaussian_mixture(h);
        j["model"] = "gaussian";
        j["background"] = {{"mu", m.background.mu},
                           {"sigma2", m.background.sigma2},
                           {"weight", m.background.weight}};
        j["foreground"] = {{"mu", m.foreground.mu},
                           {"sigma2", m.foreground.sigma2},
                           {"weight", m.foreground.weight}};
      }
      jm.push_back(j);
    }
    njtv::write_file_atomic((fs::path(out_dir) / "mixtures.json").string(),
                            jm.dump(2) + "\n");
  }

  njtv::RegistrationResult result;
  if (opts.cost == njtv::CostKind::njtv) {
    result = njtv::register_groupwise(vols, opts);
  } else {
    if (vols.size() == 2 && fixed_index == 0) {
      result = njtv::register_pairwise(vols[0], vols[1], opts);
    } else {
      // Pairwise baselines: one image is the reference, all others are
      // aligned to it independently.
      result.fixed_index = fixed_index;
      result.channels.assign(vols.size(), njtv::ChannelResult{});
      for (size_t c = 0; c < vols.size(); ++c) {
        if (c == fixed_index) continue;
        const njtv::RegistrationResult r =
            njtv::register_pairwise(vols[fixed_index], vols[c], opts);
        result.channels[c] = r.channels[1];
        result.final_cost += r.final_cost;
      }
    }
  }

  njtv::json j = njtv::to_json(result);
  j["cost"] = cost_name;
  j["inputs"] = inputs;
  njtv::write_file_atomic((fs::path(out_dir) / "transforms.json").string(),
                          j.dump(2) + "\n");

  if (!apply.empty()) {
    const njtv::ApplyMode mode = apply == "header" ? njtv::ApplyMode::header
                                                   : njtv::ApplyMode::reslice;
    const std::vector<njtv::Volume> applied =
        njtv::apply_result(vols, result, mode);
    for (size_t c = 0; c < applied.size(); ++c) {
      if (c == fixed_index) continue;
      const std::string stem = fs::path(inputs[c]).stem().string();
      const std::string suffix = apply == "header" ? "_realigned.nii"
                                                   : "_resliced.nii";
      njtv::save_nifti(applied[c],
                       (fs::path(out_dir) / (stem + suffix)).string());
    }
  }
  std::cout << "wrote " << (fs::path(out_dir) / "transforms.json").string()
            << "\n";
  return 0;
}

int cmd_phantom(std::array<int, 3> dims, int channels, uint64_t seed,
                const std::string& out_dir) {
  const auto vols = njtv::make_phantom(dims, channels, seed);
  fs::create_directories(out_dir);
  for (size_t c = 0; c < vols.size(); ++c) {
    const std::string path =
        (fs::path(out_dir) / ("phantom_ch" + std::to_string(c) + ".nii"))
            .string();
    njtv::save_nifti(vols[c], path);
    std::cout << "wrote " << path << "\n";
  }
  return 0;
}

int cmd_simulate(int trials, uint64_t seed, const std::string& costs_arg,
                 const std::string& out_dir, int dim, int channels,
                 double inu, double noise, int ds, double offset_mm,
                 double offset_deg) {
  njtv::SimulationConfig cfg;
  cfg.dims = {dim, dim, dim};
  cfg.channels = channels;
  cfg.degradation.inu_magnitude = inu;
  cfg.degradation.max_noise_percent = noise;
  cfg.degradation.max_downsample_factor = ds;
  cfg.degradation.max_offset_mm = offset_mm;
  cfg.degradation.max_offset_deg = offset_deg;
  cfg.costs.clear();
  std::istringstream cs(costs_arg);
  std::string tok;
  while (std::getline(cs, tok, ','))
    cfg.costs.push_back(njtv::cost_from_string(tok));
  if (cfg.costs.empty())
    throw CLI::ValidationError("--costs", "no cost functions given");

  const std::vector<njtv::TrialRecord> records =
      njtv::run_simulation(cfg, trials, seed);

  fs::create_directories(out_dir);
  std::ostringstream jl;
  for (const auto& r : records) jl << njtv::to_json(r).dump() << "\n";
  njtv::write_file_atomic((fs::path(out_dir) / "trials.jsonl").string(),
                          jl.str());
  const auto rows = njtv::error_rows(records, cfg.degradation);
  njtv::write_file_atomic((fs::path(out_dir) / "errors.csv").string(),
                          njtv::error_csv(rows));
  std::cout << "wrote " << (fs::path(out_dir) / "trials.jsonl").string()
            << " and errors.csv (" << rows.size() << " rows)\n";
  return 0;
}

int cmd_evaluate(const std::string& errors_path, const std::string& out_path) {
  std::ifstream is(errors_path);
  if (!is) throw njtv::IoError("cannot open " + errors_path);
  const auto rows = njtv::parse_error_csv(is);
  const auto summaries = njtv::summarize(rows);
  std::cout << njtv::summary_table(summaries);
  if (!out_path.empty()) {
    njtv::json j = njtv::json::array();
    for (const auto& s : summaries) {
      njtv::json js;
      js["method"] = s.method;
      js["translation"] = {{"gmean_mm", s.translation.gmean},
                           {"gsd", s.translation.gsd}};
      js["rotation"] = {{"gmean_deg", s.rotation.gmean},
                        {"gsd", s.rotation.gsd}};
      if (s.fit_ok) {
        js["fit"] = {{"intercept", s.fit.intercept},
                     {"inu", s.fit.beta_inu},
                     {"noise", s.fit.beta_noise},
                     {"downsampling", s.fit.beta_ds},
                     {"offset", s.fit.beta_offset},
                     {"residual_variance", s.fit.residual_variance}};
      }
      j.push_back(js);
    }
    njtv::write_file_atomic(out_path, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_sweep(int c_total, const std::string& fixed_arg, double lo, double hi,
              double step, bool unmodulated, const std::string& out_path) {
  std::vector<double> fixed_mags;
  std::istringstream fs_(fixed_arg);
  std::string tok;
  while (std::getline(fs_, tok, ',')) fixed_mags.push_back(std::stod(tok));
  const auto rows =
      njtv::integrand_sweep(c_total, fixed_mags, lo, hi, step, !unmodulated);
  const std::string csv = njtv::sweep_csv(rows);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    njtv::write_file_atomic(out_path, csv);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Groupwise multimodal rigid registration with the NJTV cost"};
  app.require_subcommand(1);
  app.fallthrough();  // global --seed/--threads may follow the subcommand

  uint64_t seed = 0;
  int threads = 1;
  app.add_option("--seed", seed, "master seed for all randomness")
      ->capture_default_str();
  app.add_option("--threads", threads,
                 "worker threads (never changes numeric output)")
      ->check(CLI::PositiveNumber);

  // register
  auto* reg = app.add_subcommand("register", "rigidly align >= 2 volumes");
  std::vector<std::string> inputs;
  std::string cost = "njtv", out_dir = "njtv_out", apply;
  size_t fixed_index = 0;
  bool dump_mixtures = false, no_jitter = false;
  reg->add_option("inputs", inputs, "NIfTI volumes (first = fixed by default)")
      ->required()
      ->expected(2, -1)
      ->check(CLI::ExistingFile);
  reg->add_option("--cost", cost, "njtv|mi|nmi|ecc|ncc")
      ->check(CLI::IsMember({"njtv", "mi", "nmi", "ecc", "ncc"}))
      ->capture_default_str();
  reg->add_option("--out", out_dir, "output directory")->capture_default_str();
  reg->add_option("--fixed", fixed_index, "index of the fixed volume");
  reg->add_option("--apply", apply, "write realigned outputs")
      ->check(CLI::IsMember({"header", "reslice"}));
  reg->add_flag("--dump-mixtures", dump_mixtures,
                "write fitted intensity mixtures as JSON");
  reg->add_flag("--no-jitter", no_jitter, "disable sampling-grid jitter");

  // phantom
  auto* pha = app.add_subcommand("phantom", "write a synthetic multimodal "
                                            "phantom");
  int dim = 96, channels = 3;
  std::string pha_out = "phantom";
  pha->add_option("--dim", dim, "cubic dimension")->capture_default_str();
  pha->add_option("--channels", channels, "number of modalities")
      ->capture_default_str();
  pha->add_option("--out", pha_out, "output directory")
      ->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand(
      "simulate", "run degradation + registration trials with ground truth");
  int trials = 20;
  std::string costs = "njtv,mi", sim_out = "simulation";
  int sim_dim = 96, sim_channels = 3, sim_ds = 2;
  double sim_inu = 0.4, sim_noise = 10.0, sim_off_mm = 20.0,
         sim_off_deg = 10.0;
  sim->add_option("--trials", trials, "number of trials")
      ->required()
      ->check(CLI::PositiveNumber);
  sim->add_option("--costs", costs, "comma-separated cost functions")
      ->capture_default_str();
  sim->add_option("--out", sim_out, "output directory")
      ->capture_default_str();
  sim->add_option("--dim", sim_dim, "phantom dimension")
      ->capture_default_str();
  sim->add_option("--channels", sim_channels, "phantom channels")
      ->capture_default_str();
  sim->add_option("--inu", sim_inu, "INU magnitude (drawn from {0, value})")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sim->add_option("--noise", sim_noise, "max noise percent")
      ->check(CLI::Range(0.0, 50.0))
      ->capture_default_str();
  sim->add_option("--ds", sim_ds, "max thick-slice factor")
      ->check(CLI::Range(1, 6))
      ->capture_default_str();
  sim->add_option("--offset-mm", sim_off_mm, "max translation offset")
      ->capture_default_str();
  sim->add_option("--offset-deg", sim_off_deg, "max rotation offset")
      ->capture_default_str();

  // evaluate
  auto* eva = app.add_subcommand("evaluate",
                                 "summarize an error CSV (geometric stats + "
                                 "log-linear fit)");
  std::string errors_path, eval_out;
  eva->add_option("--errors", errors_path, "errors.csv from simulate")
      ->required()
      ->check(CLI::ExistingFile);
  eva->add_option("--out", eval_out, "optional JSON summary path");

  // sweep
  auto* swp = app.add_subcommand("sweep",
                                 "1D sweep of the NJTV integrand (CSV)");
  int sweep_c = 2;
  std::string sweep_fixed = "8", sweep_out;
  double sweep_lo = 0.0, sweep_hi = 16.0, sweep_step = 0.01;
  bool unmodulated = false;
  swp->add_option("--C", sweep_c, "number of channels")
      ->check(CLI::Range(2, 64))
      ->capture_default_str();
  swp->add_option("--fixed", sweep_fixed,
                  "comma-separated fixed magnitudes (C-1 values)")
      ->capture_default_str();
  swp->add_option("--lo", sweep_lo, "sweep start")->capture_default_str();
  swp->add_option("--hi", sweep_hi, "sweep end")->capture_default_str();
  swp->add_option("--step", sweep_step, "sweep step")->capture_default_str();
  swp->add_flag("--unmodulated", unmodulated,
                "replace the sqrt(C) modulation by 1");
  swp->add_option("--out", sweep_out, "CSV path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2, --help exits 0
  }

  njtv::thread_count() = threads;

  try {
    if (reg->parsed())
      return cmd_register(inputs, cost, out_dir, fixed_index, seed, apply,
                          dump_mixtures, no_jitter);
    if (pha->parsed()) return cmd_phantom({dim, dim, dim}, channels, seed,
                                          pha_out);
    if (sim->parsed())
      return cmd_simulate(trials, seed, costs, sim_out, sim_dim, sim_channels,
                          sim_inu, sim_noise, sim_ds, sim_off_mm,
                          sim_off_deg);
    if (eva->parsed()) return cmd_evaluate(errors_path, eval_out);
    if (swp->parsed())
      return cmd_sweep(sweep_c, sweep_fixed, sweep_lo, sweep_hi, sweep_step,
                       unmodulated, sweep_out);
  } catch (const njtv::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
