#include <catch2/catch_amalgamated.hpp>

#include <njtv/nifti.hpp>
#include <njtv/reporting.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace njtv;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path log = fs::temp_directory_path() /
                       ("njtv_cli_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++) + ".log");
  const std::string cmd =
      std::string(NJTV_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(log);
  std::ostringstream os;
  os << is.rdbuf();
  r.output = os.str();
  fs::remove(log);
  return r;
}

fs::path fresh_dir(const std::string& stem) {
  const fs::path d = fs::temp_directory_path() /
                     (stem + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// Smallest m with the lowest value in a sweep CSV ("m,njtv" header).
double csv_argmin(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  REQUIRE(line == "m,njtv");
  double best_m = -1, best_v = 1e300;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const size_t comma = line.find(',');
    const double m = std::stod(line.substr(0, comma));
    const double v = std::stod(line.substr(comma + 1));
    if (v < best_v) {
      best_v = v;
      best_m = m;
    }
  }
  return best_m;
}

}  // namespace

TEST_CASE("help exits 0, usage errors exit 2") {
  REQUIRE(run_cli("--help").exit_code == 0);
  REQUIRE(run_cli("sweep --help").exit_code == 0);
  REQUIRE(run_cli("").exit_code == 2);                 // subcommand required
  REQUIRE(run_cli("frobnicate").exit_code == 2);       // unknown subcommand
  REQUIRE(run_cli("simulate").exit_code == 2);         // --trials required
  REQUIRE(run_cli("sweep --C 1").exit_code == 2);      // out of range
  REQUIRE(run_cli("evaluate --errors /no/such/file.csv").exit_code == 2);
}

TEST_CASE("sweep finds the minimum at the held magnitude") {
  const fs::path dir = fresh_dir("njtv_sweep");
  const fs::path out = dir / "sweep.csv";

  const RunResult r = run_cli("sweep --C 2 --fixed 8 --lo 0 --hi 16 "
                              "--step 0.01 --out " + out.string());
  REQUIRE(r.exit_code == 0);
  REQUIRE_THAT(csv_argmin(read_file(out)),
               Catch::Matchers::WithinAbs(8.0, 0.011));

  const RunResult u = run_cli("sweep --C 2 --fixed 8 --lo 0 --hi 16 "
                              "--step 0.01 --unmodulated --out " +
                              out.string());
  REQUIRE(u.exit_code == 0);
  REQUIRE(csv_argmin(read_file(out)) == 0.0);

  // Stdout mode and a C=3 sweep: argmin at sqrt(34) for fixed {2,8}.
  const RunResult s = run_cli("sweep --C 3 --fixed 2,8 --step 0.001");
  REQUIRE(s.exit_code == 0);
  REQUIRE_THAT(csv_argmin(s.output),
               Catch::Matchers::WithinAbs(std::sqrt(34.0), 0.002));

  fs::remove_all(dir);
}

TEST_CASE("phantom writes loadable NIfTI channels") {
  const fs::path dir = fresh_dir("njtv_phantom");
  const RunResult r = run_cli("phantom --dim 32 --channels 2 --seed 5 --out " +
                              dir.string());
  REQUIRE(r.exit_code == 0);
  for (int c = 0; c < 2; ++c) {
    const fs::path p = dir / ("phantom_ch" + std::to_string(c) + ".nii");
    REQUIRE(fs::exists(p));
    const Volume v = load_nifti(p.string());
    REQUIRE(v.dims == std::array<int, 3>{32, 32, 32});
  }
  // Same seed reproduces the files bit for bit.
  const fs::path dir2 = fresh_dir("njtv_phantom2");
  REQUIRE(run_cli("phantom --dim 32 --channels 2 --seed 5 --out " +
                  dir2.string())
              .exit_code == 0);
  REQUIRE(read_file(dir / "phantom_ch0.nii") ==
          read_file(dir2 / "phantom_ch0.nii"));
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("register writes transforms.json with an identity fixed channel") {
  const fs::path dir = fresh_dir("njtv_register");
  REQUIRE(run_cli("phantom --dim 32 --channels 2 --seed 9 --out " +
                  dir.string())
              .exit_code == 0);
  const std::string ch0 = (dir / "phantom_ch0.nii").string();
  const std::string ch1 = (dir / "phantom_ch1.nii").string();

  const fs::path out = dir / "reg";
  const RunResult r = run_cli("register " + ch0 + " " + ch1 +
                              " --cost mi --out " + out.string());
  REQUIRE(r.exit_code == 0);
  const fs::path tj = out / "transforms.json";
  REQUIRE(fs::exists(tj));

  const json j = json::parse(read_file(tj));
  REQUIRE(j["cost"] == "mi");
  REQUIRE(j["channels"].size() == 2);
  for (double x : j["channels"][0]["q"]) REQUIRE(x == 0.0);
  // The inputs were already aligned, so the estimate stays tiny.
  for (double x : j["channels"][1]["q"]) REQUIRE(std::abs(x) < 0.5);

  // Determinism: a repeat run produces the identical file.
  const fs::path out2 = dir / "reg2";
  REQUIRE(run_cli("register " + ch0 + " " + ch1 + " --cost mi --out " +
                  out2.string())
              .exit_code == 0);
  REQUIRE(read_file(tj) == read_file(out2 / "transforms.json"));

  // --apply reslice writes a volume on the fixed grid.
  const fs::path out3 = dir / "reg3";
  REQUIRE(run_cli("register " + ch0 + " " + ch1 +
                  " --cost mi --apply reslice --dump-mixtures --out " +
                  out3.string())
              .exit_code == 0);
  REQUIRE(fs::exists(out3 / "phantom_ch1_resliced.nii"));
  REQUIRE(fs::exists(out3 / "mixtures.json"));
  const Volume resliced =
      load_nifti((out3 / "phantom_ch1_resliced.nii").string());
  REQUIRE(resliced.dims == std::array<int, 3>{32, 32, 32});

  // A single input is a usage error.
  REQUIRE(run_cli("register " + ch0).exit_code == 2);
  fs::remove_all(dir);
}

TEST_CASE("simulate and evaluate round trip") {
  const fs::path dir = fresh_dir("njtv_simulate");
  const std::string args =
      "simulate --trials 2 --dim 64 --channels 2 --costs ncc --ds 1 "
      // Seed chosen so NCC converges on both trials (it can legitimately
      // walk out of the overlap on a multimodal pair, which drops rows).
      "--noise 5 --inu 0 --offset-mm 3 --offset-deg 2 --seed 13 --out ";
  REQUIRE(run_cli(args + dir.string()).exit_code == 0);
  REQUIRE(fs::exists(dir / "trials.jsonl"));
  REQUIRE(fs::exists(dir / "errors.csv"));

  // The CSV parses back and has 2 trials x 1 moving channel x 3 axes rows.
  std::ifstream is(dir / "errors.csv");
  const auto rows = parse_error_csv(is);
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) REQUIRE(r.method == "ncc");

  // Same seed reproduces the outputs byte for byte.
  const fs::path dir2 = fresh_dir("njtv_simulate2");
  REQUIRE(run_cli(args + dir2.string()).exit_code == 0);
  REQUIRE(read_file(dir / "errors.csv") == read_file(dir2 / "errors.csv"));
  REQUIRE(read_file(dir / "trials.jsonl") ==
          read_file(dir2 / "trials.jsonl"));

  // evaluate prints the summary table and writes the optional JSON.
  const fs::path summary = dir / "summary.json";
  const RunResult ev = run_cli("evaluate --errors " +
                               (dir / "errors.csv").string() + " --out " +
                               summary.string());
  REQUIRE(ev.exit_code == 0);
  REQUIRE(ev.output.find("method") != std::string::npos);
  REQUIRE(ev.output.find("ncc") != std::string::npos);
  const json js = json::parse(read_file(summary));
  REQUIRE(js.size() == 1);
  REQUIRE(js[0]["method"] == "ncc");

  // A corrupted CSV is a format error (exit 2).
  const fs::path bad = dir / "bad.csv";
  std::ofstream(bad) << "method,trial\nncc,0\n";
  REQUIRE(run_cli("evaluate --errors " + bad.string()).exit_code == 2);

  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("error CSV serialization round trips") {
  std::vector<ErrorRow> rows(3);
  rows[0] = {"njtv", 0, 1, 2, 0.125, 0.5, 0.4, 0.07, 2.0, 0.33};
  rows[1] = {"mi", 1, 2, 0, 1.5e-3, 0.0625, 0.0, 0.01, 1.0, 0.9};
  rows[2] = {"ncc", 2, 1, 1, 3.0, 1.25, 0.4, 0.1, 2.0, 0.1};
  std::istringstream is(error_csv(rows));
  const auto back = parse_error_csv(is);
  REQUIRE(back.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    REQUIRE(back[i].method == rows[i].method);
    REQUIRE(back[i].trial == rows[i].trial);
    REQUIRE(back[i].channel == rows[i].channel);
    REQUIRE(back[i].axis == rows[i].axis);
    REQUIRE(back[i].trans_err_mm == rows[i].trans_err_mm);
    REQUIRE(back[i].rot_err_deg == rows[i].rot_err_deg);
    REQUIRE(back[i].inu == rows[i].inu);
    REQUIRE(back[i].noise == rows[i].noise);
    REQUIRE(back[i].downsampling == rows[i].downsampling);
    REQUIRE(back[i].offset == rows[i].offset);
  }

  std::istringstream empty("");
  REQUIRE_THROWS_AS(parse_error_csv(empty), FormatError);
  std::istringstream badhdr("foo,bar\n");
  REQUIRE_THROWS_AS(parse_error_csv(badhdr), FormatError);
  std::istringstream badline(
      "method,trial,channel,axis,trans_err_mm,rot_err_deg,inu,noise,"
      "downsampling,offset\nnjtv,0,1\n");
  REQUIRE_THROWS_AS(parse_error_csv(badline), FormatError);
}
