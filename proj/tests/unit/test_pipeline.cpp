#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "json.hpp"
#include "vqrng/parallel.hpp"
#include "vqrng/pipeline.hpp"

using namespace vqrng;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "vqrng_unit" / name;
  fs::remove_all(p);
  return p;
}

PipelineConfig small_config(const fs::path& out) {
  auto cfg = parse_config(R"(
# small end-to-end run
run.seed = 7
simulate.samples = 262144
simulate.lpf_band_qcnr_db = 9.51
simulate.electronic_f3db = 3.5e9
equalize.taps = 257
entropy.sweep_step = 0.25
test.sequence_len = 20000
test.max_sequences = 20
)");
  cfg.output_dir = out;
  return cfg;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    files[e.path().filename().string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return files;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config("run.seed = 99\n  adc.bits=10 # trailing comment\n\nentropy.range_objective = avg\n");
  CHECK(cfg.seed == 99);
  CHECK(cfg.adc_bits == 10);
  CHECK(cfg.range_objective == entropy::Objective::Average);

  CHECK_THROWS_WITH_AS(parse_config("nope.key = 1"), doctest::Contains("unknown config key 'nope.key'"), StageError);
  CHECK_THROWS_WITH_AS(parse_config("adc.bits = twelve"), doctest::Contains("adc.bits"), StageError);
  CHECK_THROWS_WITH_AS(parse_config("adc.bits"), doctest::Contains("line 1"), StageError);

  auto o = cfg;
  apply_override(o, "equalize.f_eq=2.5e9");
  CHECK(o.f_eq == 2.5e9);
  CHECK_THROWS_AS(apply_override(o, "equalize.f_eq"), StageError);
}

TEST_CASE("config round trip") {
  auto cfg = repro_paper_config();
  cfg.seed = 123456789012345ull;
  cfg.epsilon = 0x1p-40;
  const auto text = format_config(cfg);
  const auto back = parse_config(text);
  CHECK(format_config(back) == text);
  CHECK(back.seed == cfg.seed);
  CHECK(back.epsilon == cfg.epsilon);
  CHECK(back.qcnr_db == cfg.qcnr_db);
  CHECK(config_keys().size() > 30);
  for (const auto& k : config_keys()) CHECK(text.find(k + " = ") != std::string::npos);
}

TEST_CASE("repro preset") {
  const auto cfg = repro_paper_config();
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.model.sigma_q == 0.0393);
  CHECK(cfg.model.f3db == 2.4e9);
  CHECK(cfg.model.sample_rate == 6.25e9);
  CHECK(cfg.adc_bits == 12);
  CHECK(cfg.f_eq == 3e9);
  CHECK(*cfg.qcnr_db == 9.51);
  CHECK(noisesim::lpf_band_qcnr_db(cfg.effective_model(), cfg.f_cut) == doctest::Approx(9.51));
  CHECK(cfg.effective_model().seed != cfg.toeplitz_seed());
}

TEST_CASE("validation names the offending field") {
  auto cfg = small_config(scratch("invalid"));
  cfg.f_eq = 4e9;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("equalize.f_eq"), StageError);
  cfg = small_config(scratch("invalid"));
  cfg.measured_input = "/nonexistent/m.vqt";
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("input.electronic"), StageError);
}

TEST_CASE("stage names and exit codes") {
  CHECK(exit_code(Stage::Config) == 2);
  CHECK(exit_code(Stage::Test) == 8);
  for (Stage s : kAllStages) CHECK(parse_stage(to_string(s)) == s);
  CHECK_THROWS_AS(parse_stage("bogus"), StageError);
}

TEST_CASE("missing input file is attributed to its stage and field") {
  auto cfg = small_config(scratch("missing"));
  cfg.measured_input = "/nonexistent/m.vqt";
  cfg.electronic_input = "/nonexistent/e.vqt";
  try {
    run_stages(cfg, {Stage::Characterize});
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == Stage::Characterize);
    CHECK(std::string(e.what()).find("characterize: input.measured") == 0);
  }

  cfg = small_config(scratch("order"));
  try {
    run_stages(cfg, {Stage::Extract});
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == Stage::Extract);
    CHECK(std::string(e.what()).find("missing artifact") != std::string::npos);
  }
}

TEST_CASE("pipeline is deterministic and composable") {
  const auto a = scratch("run_a"), b = scratch("run_b"), c = scratch("run_c");

  auto cfg = small_config(a);
  const auto summary = nlohmann::json::parse(run_pipeline(cfg));
  CHECK(summary["entropy"]["h_worst"].get<double>() <= summary["entropy"]["h_avg"].get<double>());
  CHECK(summary["equalization"]["qcnr_post_db"].get<double>() < summary["detector"]["qcnr_pre_db"].get<double>());
  CHECK(summary["extraction"]["output_bits"].get<double>() > 0);

  auto one = small_config(b);
  one.threads = 1;
  run_pipeline(one);

  // same stages, one invocation each
  auto split = small_config(c);
  split.threads = 3;
  for (Stage s : kAllStages) run_stages(split, {s});
  write_summary(split);

  const auto sa = snapshot(a), sb = snapshot(b), sc = snapshot(c);
  CHECK(sa.size() >= 20);
  for (const char* f : {artifacts::kMeasured, artifacts::kSweep, artifacts::kExtracted, artifacts::kTestJson,
                        artifacts::kSummary, artifacts::kConfig})
    CHECK(sa.count(f) == 1);
  for (const auto& [name, bytes] : sa) {
    CHECK_MESSAGE(sb.at(name) == bytes, name);
    CHECK_MESSAGE(sc.at(name) == bytes, name);
  }
  set_thread_count(0);
}

TEST_CASE("recorded traces replace simulation") {
  const auto a = scratch("sim_src");
  auto cfg = small_config(a);
  run_stages(cfg, {Stage::Simulate});

  const auto b = scratch("from_files");
  auto rec = small_config(b);
  rec.measured_input = a / artifacts::kMeasured;
  rec.electronic_input = a / artifacts::kElectronic;
  run_stages(rec, {Stage::Characterize, Stage::Equalize, Stage::Entropy});
  CHECK(fs::exists(b / artifacts::kEntropyJson));
  CHECK_FALSE(fs::exists(b / artifacts::kMeasured));
}
