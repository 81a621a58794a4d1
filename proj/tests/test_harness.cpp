#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "kerrw/harness.hpp"

using namespace kerrw;
using namespace kerrw::harness;
using Catch::Approx;

namespace {
json base_json(const std::string& experiment) {
  json j;
  j["experiment"] = experiment;
  return j;
}
}  // namespace

TEST_CASE("config parsing rejects malformed input") {
  CHECK_THROWS_AS(parse_config(json::object()), ConfigError);

  json bad_axis = base_json("negativity-vs-time");
  bad_axis["times"]["axis"] = "weeks";
  CHECK_THROWS_AS(parse_config(bad_axis), ConfigError);

  json bad_rate = base_json("evolve");
  bad_rate["model"]["gamma"] = -1.0;
  CHECK_THROWS_AS(parse_config(bad_rate), ConfigError);

  json bad_times = base_json("evolve");
  bad_times["times"]["scaled"] = {0.2, 0.1};
  CHECK_THROWS_AS(parse_config(bad_times), ConfigError);

  json bad_type = base_json("evolve");
  bad_type["model"]["g"] = "fast";
  CHECK_THROWS_AS(parse_config(bad_type), ConfigError);

  CHECK_THROWS_AS(load_config("no_such_file.json"), ConfigError);

  json unknown = base_json("teleport");
  CHECK_THROWS_AS(run_experiment(parse_config(unknown)), ConfigError);
}

TEST_CASE("squeezing table reproduces the reference values to two decimals") {
  RunConfig c = parse_config(json::parse(R"({"experiment":"table-gen",
      "sweep":{"table":"squeezing-table"}})"));
  ExperimentResult res = run_experiment(c);
  REQUIRE(res.rows.size() == 9);
  const std::vector<double> expect{1.65, 2.12, 2.72, 3.49, 4.48, 5.75, 7.39, 9.49, 12.18};
  for (size_t i = 0; i < expect.size(); ++i)
    CHECK(std::round(res.rows[i][1] * 100.0) / 100.0 == Approx(expect[i]));
}

TEST_CASE("decay table reproduces the scaled decay times to two decimals") {
  RunConfig c = parse_config(json::parse(R"({"experiment":"table-gen",
      "model":{"gamma":0.37},
      "sweep":{"table":"decay-table","nbar_env":1000}})"));
  ExperimentResult res = run_experiment(c);
  REQUIRE(res.rows.size() == 7);
  const std::vector<double> expect{2.72, 4.48, 7.39, 12.18, 20.09, 33.12, 54.60};
  for (size_t i = 0; i < expect.size(); ++i)
    CHECK(std::round(res.rows[i][1] * 100.0) / 100.0 == Approx(expect[i]));
}

TEST_CASE("csv format uses crlf rows and twelve significant digits") {
  std::string text = csv_text({"a", "b"}, {{1.0 / 3.0, 2.0}});
  CHECK(text == "a,b\r\n0.333333333333,2\r\n");
  CHECK_THROWS_AS(csv_text({"a"}, {{1.0, 2.0}}), NumericalError);
}

TEST_CASE("identical configs give bit-identical tables") {
  json j = base_json("scaled-collapse");
  j["model"]["g"] = 1.0;
  j["state"] = {{"kind", "squeezed_vacuum"}};
  j["times"] = {{"scaled", {0.1, 0.2}}, {"axis", "gts4_per_sigma2"}};
  j["sweep"] = {{"r0", {1.0}}};
  RunConfig c = parse_config(j);
  ExperimentResult a = run_experiment(c);
  ExperimentResult b = run_experiment(c);
  CHECK(csv_text(a.columns, a.rows) == csv_text(b.columns, b.rows));
}

TEST_CASE("scaled axis identities hold exactly in emitted columns") {
  json j = base_json("kerr-decay");
  j["state"] = {{"kind", "squeezed_vacuum"}, {"r0", 0.8}};
  j["times"] = {{"decay", {0.5, 1.0}}};
  j["sweep"] = {{"tau0", {0.2}}, {"nbar_env", 500.0}, {"decoherence", "damping"}};
  RunConfig c = parse_config(j);
  ExperimentResult res = run_experiment(c);
  // growth rows carry neutral_axis == tau0; decay rows offset by the
  // configured scaled decay times, exactly
  for (const auto& row : res.rows) {
    if (row[0] == 0.0) {
      CHECK(row[2] == row[1]);
    } else {
      const double off = row[2] - row[1];
      CHECK((std::abs(off - 0.5) <= 1e-9 || std::abs(off - 1.0) <= 1e-9));
    }
  }

  json jd = j;
  jd["sweep"]["decoherence"] = "dephasing";
  ExperimentResult resd = run_experiment(parse_config(jd));
  REQUIRE(resd.rows.size() == res.rows.size());
}

TEST_CASE("dephasing leaves number states flat in the decay branch") {
  // a diagonal state never changes under dephasing, so the decay branch is
  // constant in the neutral axis
  json j = base_json("kerr-decay");
  j["state"] = {{"kind", "squeezed_vacuum"}, {"r0", 0.0}};  // vacuum: diagonal
  j["times"] = {{"decay", {0.5, 2.0}}};
  j["sweep"] = {{"tau0", {0.1}}, {"decoherence", "dephasing"}};
  ExperimentResult res = run_experiment(parse_config(j));
  // vacuum is kerr-stationary and diagonal: all rows have zero negativity
  for (const auto& row : res.rows) CHECK(row[3] <= 1e-8);
}

TEST_CASE("evolve experiment reports full-period fidelity") {
  json j = base_json("evolve");
  j["model"]["g"] = 1.0;
  j["state"] = {{"kind", "coherent"}, {"alpha_re", 1.0}};
  j["times"] = {{"scaled", {pi}}, {"axis", "gt"}};
  j["solver"] = {{"rtol", 1e-9}, {"atol", 1e-13}};
  ExperimentResult res = run_experiment(parse_config(j));
  // purity of a pure state equals the self-overlap, so the last row's
  // fidelity column must return to one
  CHECK(res.rows.back()[1] >= 1.0 - 1e-5);
  CHECK(res.rows.back()[3] == Approx(1.0).margin(1e-9));
}

TEST_CASE("coherent plateau guards its domain") {
  json j = base_json("coherent-plateau");
  j["sweep"] = {{"alpha0", {1.0}}};
  CHECK_THROWS_AS(run_experiment(parse_config(j)), ConfigError);
}

TEST_CASE("outputs land on disk with the sidecar") {
  namespace fs = std::filesystem;
  json j = base_json("table-gen");
  j["sweep"] = {{"table", "squeezing-table"}};
  j["output"] = {{"prefix", "t2"}};
  RunConfig c = parse_config(j);
  const std::string dir = "harness_out_test";
  run_to_files(c, dir);
  CHECK(fs::exists(fs::path(dir) / "t2.csv"));
  REQUIRE(fs::exists(fs::path(dir) / "t2.json"));
  std::ifstream in(fs::path(dir) / "t2.json");
  json side;
  in >> side;
  CHECK(side.contains("config_hash"));
  CHECK(side["library_version"] == version_string);
  CHECK(side["config"]["experiment"] == "table-gen");
  fs::remove_all(dir);
}

TEST_CASE("auto basis growth meets the tail target") {
  RunConfig c;
  c.state_kind = "squeezed_vacuum";
  c.spec.r0 = 1.5;
  c.tail_threshold = 1e-7;
  DensityMatrix rho = build_initial(c, basis_size_for(c));
  CHECK(rho.dim() > basis_size_for(c));
  CHECK(diagonal_tail_mass(rho.elements) < 1e-7);
}

TEST_CASE("short-time coherent negativity collapses on the scaled axis") {
  // curves against gt alpha0^(3/2) overlay across alpha0
  std::vector<double> axis{0.3, 0.5, 0.7, 0.9};
  std::vector<std::vector<double>> curves;
  for (double a0 : {3.0, 4.0}) {
    RunConfig c;
    c.state_kind = "coherent";
    c.model.kerr_rate = 1.0;
    c.spec.alpha0 = a0;
    DensityMatrix rho0 = build_initial(c, basis_size_for(c));
    std::vector<double> vols;
    for (double ax : axis) {
      DensityMatrix st = apply_kerr(rho0, 1.0, ax / std::pow(a0, 1.5));
      RunConfig g = c;
      g.dx_scaled = 0.13 / (1.0 + a0);
      g.dy_scaled = g.dx_scaled;
      vols.push_back(negativity(wigner_grid(st, pick_grid(g, st))).n_vol);
    }
    curves.push_back(vols);
  }
  for (size_t i = 0; i < axis.size(); ++i) {
    const double ref = std::max(curves[0][i], curves[1][i]);
    if (ref < 0.02) continue;
    CHECK(std::abs(curves[0][i] - curves[1][i]) / ref <= 0.15);
  }
}

TEST_CASE("contour grid is monotone and genuinely non-additive") {
  json j;
  j["experiment"] = "max-negativity-contour";
  j["state"] = {{"kind", "squeezed_vacuum"}};
  j["basis"] = {{"tail_threshold", 1e-7}};
  j["sweep"] = {{"r0", {1.25}},
                {"damping", {0.0, 0.75, 1.5}},
                {"dephasing", {0.0, 0.75, 1.5}},
                {"nbar_env", 1000.0},
                {"gts4_max", 1.2}};
  ExperimentResult res = run_experiment(parse_config(j));
  REQUIRE(res.rows.size() == 9);
  CHECK(res.summary["monotone_in_rates"]["1.250000"].get<bool>());

  // the zero-decoherence cell is the unitary plateau height
  double zero_cell = 0.0, max_cell = 0.0;
  for (const auto& row : res.rows) {
    if (row[1] == 0.0 && row[2] == 0.0) zero_cell = row[3];
    max_cell = std::max(max_cell, row[3]);
  }
  CHECK(zero_cell == max_cell);

  // a purely additive damping+dephasing model cannot reproduce the grid
  const double interaction =
      res.summary["additive_fit_residual"]["1.250000"].get<double>();
  CHECK(interaction > 0.03 * max_cell);
}
