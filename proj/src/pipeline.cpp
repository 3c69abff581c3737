#include "vqrng/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vqrng/dsp.hpp"
#include "vqrng/extract.hpp"
#include "vqrng/parallel.hpp"
#include "vqrng/rndtest.hpp"

namespace vqrng {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing artifact " + path.filename().string() + " (run the earlier stages first)");
  return json::parse(in);
}

NoiseTrace load_trace(const fs::path& path, const char* field) {
  if (!fs::exists(path)) throw Error(std::string(field) + ": no such file " + path.string());
  return read_analog_trace(path);
}

fs::path measured_path(const PipelineConfig& cfg) {
  return cfg.measured_input.empty() ? cfg.output_dir / artifacts::kMeasured : cfg.measured_input;
}

fs::path electronic_path(const PipelineConfig& cfg) {
  return cfg.electronic_input.empty() ? cfg.output_dir / artifacts::kElectronic : cfg.electronic_input;
}

const char* measured_field(const PipelineConfig& cfg) {
  return cfg.measured_input.empty() ? "simulate output measured.vqt" : "input.measured";
}

const char* electronic_field(const PipelineConfig& cfg) {
  return cfg.electronic_input.empty() ? "simulate output electronic.vqt" : "input.electronic";
}

json moments_json(const dsp::Moments& m) {
  return {{"mean", m.mean}, {"std", m.std}, {"skewness", m.skewness}, {"kurtosis", m.kurtosis}};
}

json optimum_json(const entropy::Optimum& o) {
  return {{"ratio", o.ratio}, {"range", o.range}, {"entropy", o.entropy}, {"unimodal", o.unimodal}};
}

dsp::WelchOptions welch(const PipelineConfig& cfg) {
  dsp::WelchOptions w;
  w.segment_len = cfg.psd_segment_len;
  return w;
}

// Largest deviation (dB) of a PSD from its mean over a band.
double flatness_db(const Spectrum& psd, double lo, double hi) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < psd.size(); ++i)
    if (psd.frequencies[i] >= lo && psd.frequencies[i] <= hi) sum += psd.values[i], ++n;
  if (n == 0) return 0.0;
  const double mean = sum / static_cast<double>(n);
  double worst = 0.0;
  for (std::size_t i = 0; i < psd.size(); ++i)
    if (psd.frequencies[i] >= lo && psd.frequencies[i] <= hi)
      worst = std::max(worst, std::abs(10.0 * std::log10(psd.values[i] / mean)));
  return worst;
}

void stage_simulate(const PipelineConfig& cfg) {
  const fs::path& dir = cfg.output_dir;
  if (!cfg.measured_input.empty()) {
    write_json(dir / artifacts::kSimulateJson,
               {{"source", "input"}, {"measured", cfg.measured_input.string()},
                {"electronic", cfg.electronic_input.string()}});
    return;
  }
  const auto model = cfg.effective_model();
  const auto pair = noisesim::generate(model, cfg.samples);
  write_trace(dir / artifacts::kMeasured, pair.measured);
  write_trace(dir / artifacts::kElectronic, pair.electronic);
  write_json(dir / artifacts::kSimulateJson,
             {{"source", "simulation"},
              {"samples", cfg.samples},
              {"sigma_q", model.sigma_q},
              {"sigma_e", model.sigma_e},
              {"f3db", model.f3db},
              {"electronic_f3db", model.electronic_f3db},
              {"f_lpf", model.f_lpf},
              {"shape", model.shape == noisesim::ResponseShape::TwoPole ? "two-pole" : "single-pole"},
              {"sample_rate", model.sample_rate},
              {"seed", model.seed},
              {"programmed_qcnr_db", model.programmed_qcnr_db()},
              {"lpf_band_qcnr_db", noisesim::lpf_band_qcnr_db(model, cfg.f_cut)}});
}

void stage_characterize(const PipelineConfig& cfg) {
  const fs::path& dir = cfg.output_dir;
  const auto measured = load_trace(measured_path(cfg), measured_field(cfg));
  const auto electronic = load_trace(electronic_path(cfg), electronic_field(cfg));
  const auto psd_m = dsp::welch_psd(measured, welch(cfg));
  const auto psd_e = dsp::welch_psd(electronic, welch(cfg));
  write_spectrum_csv(dir / artifacts::kPsdMeasured, psd_m);
  write_spectrum_csv(dir / artifacts::kPsdElectronic, psd_e);

  auto report = detchar::characterize(psd_m, psd_e, cfg.detector);
  const double qcnr_density = report.qcnr;
  report.qcnr = detchar::qcnr_from_traces(measured, electronic, cfg.f_cut);
  report.validate();
  write_json(dir / artifacts::kDetectorJson,
             {{"u_M", report.u_M},
              {"u_E", report.u_E},
              {"u_Q", report.u_Q},
              {"i_Q", report.i_Q},
              {"i_E", report.i_E},
              {"I_Q", report.I_Q},
              {"I_E", report.I_E},
              {"R_F", report.R_F},
              {"qcnr", report.qcnr},
              {"qcnr_density", qcnr_density},
              {"nep", report.nep},
              {"f_3dB", report.f_3dB},
              {"responsivity", report.responsivity},
              {"f_cut", cfg.f_cut},
              {"reference_band", {cfg.detector.reference_band.first, cfg.detector.reference_band.second}}});
}

void stage_equalize(const PipelineConfig& cfg) {
  const fs::path& dir = cfg.output_dir;
  const auto measured = load_trace(measured_path(cfg), measured_field(cfg));
  const auto electronic = load_trace(electronic_path(cfg), electronic_field(cfg));
  const auto psd = read_spectrum_csv(dir / artifacts::kPsdMeasured);

  dsp::EqualizerOptions eo;
  eo.taps = cfg.eq_taps;
  eo.floor_db = cfg.eq_floor_db;
  eo.sample_rate = measured.sample_rate;
  const auto eq = dsp::design_equalizer(psd, cfg.f_eq, eo);
  CsvTable taps{{"index", "tap"}, {}};
  for (std::size_t i = 0; i < eq.size(); ++i) taps.rows.push_back({static_cast<double>(i), eq.taps[i]});
  write_csv(dir / artifacts::kEqualizerTaps, taps);

  auto m_eq = dsp::apply_fir(measured, eq);
  auto e_eq = dsp::apply_fir(electronic, eq);
  m_eq.label = "measured (equalized)";
  e_eq.label = "electronic (equalized)";
  write_trace(dir / artifacts::kMeasuredEq, m_eq);
  write_trace(dir / artifacts::kElectronicEq, e_eq);
  const auto psd_m_eq = dsp::welch_psd(m_eq, welch(cfg));
  write_spectrum_csv(dir / artifacts::kPsdMeasuredEq, psd_m_eq);
  write_spectrum_csv(dir / artifacts::kPsdElectronicEq, dsp::welch_psd(e_eq, welch(cfg)));

  const auto rho_pre = dsp::autocorrelation(measured, cfg.acf_lags);
  const auto rho_post = dsp::autocorrelation(m_eq, cfg.acf_lags);
  CsvTable acf{{"lag", "rho_pre", "rho_post"}, {}};
  for (std::size_t k = 0; k <= cfg.acf_lags; ++k) acf.rows.push_back({static_cast<double>(k), rho_pre[k], rho_post[k]});
  write_csv(dir / artifacts::kAutocorrelation, acf);

  const auto mom_pre = dsp::moments(measured);
  const auto mom_post = dsp::moments(m_eq);
  CsvTable mom{{"equalized", "mean", "std", "skewness", "kurtosis"}, {}};
  mom.rows.push_back({0.0, mom_pre.mean, mom_pre.std, mom_pre.skewness, mom_pre.kurtosis});
  mom.rows.push_back({1.0, mom_post.mean, mom_post.std, mom_post.skewness, mom_post.kurtosis});
  write_csv(dir / artifacts::kMoments, mom);

  const auto pre = entropy::estimate_sigmas(measured, electronic);
  const auto post = entropy::estimate_sigmas(m_eq, e_eq);
  const double flat_hi = std::min(0.95 * cfg.f_eq, psd_m_eq.frequencies.back());
  write_json(dir / artifacts::kEqualizeJson,
             {{"f_eq", cfg.f_eq},
              {"taps", eq.size()},
              {"rho1_pre", rho_pre[1]},
              {"rho1_post", rho_post[1]},
              {"moments_pre", moments_json(mom_pre)},
              {"moments_post", moments_json(mom_post)},
              {"qcnr_pre_full_band_db", 20.0 * std::log10(pre.sigma_Q / pre.sigma_E)},
              {"qcnr_post_db", 20.0 * std::log10(post.sigma_Q / post.sigma_E)},
              {"psd_flatness_db", flatness_db(psd_m_eq, 0.02 * cfg.f_eq, flat_hi)},
              {"psd_flatness_band", {0.02 * cfg.f_eq, flat_hi}}});
}

void stage_entropy(const PipelineConfig& cfg) {
  const fs::path& dir = cfg.output_dir;
  const auto m_eq = load_trace(dir / artifacts::kMeasuredEq, "equalize output measured_eq.vqt");
  const auto e_eq = load_trace(dir / artifacts::kElectronicEq, "equalize output electronic_eq.vqt");
  const auto s = entropy::estimate_sigmas(m_eq, e_eq);

  const entropy::SweepOptions so{cfg.beta, cfg.tolerance};
  const auto grid = entropy::ratio_grid(cfg.sweep_lo, cfg.sweep_hi, cfg.sweep_step);
  entropy::write_sweep_csv(dir / artifacts::kSweep, entropy::sweep_range(s.sigma_Q, s.sigma_E, cfg.adc_bits, grid, so));
  const auto best_avg = entropy::optimal_range(s.sigma_Q, s.sigma_E, cfg.adc_bits, entropy::Objective::Average, grid, so);
  const auto best_worst = entropy::optimal_range(s.sigma_Q, s.sigma_E, cfg.adc_bits, entropy::Objective::Worst, grid, so);

  const auto& chosen = cfg.range_objective == entropy::Objective::Average ? best_avg : best_worst;
  const double range = cfg.adc_range > 0.0 ? cfg.adc_range : chosen.range;
  const entropy::EntropyConfig ec{s.sigma_Q, s.sigma_E, AdcConfig{cfg.adc_bits, range}, cfg.beta, cfg.tolerance};
  const auto report = entropy::evaluate(ec, m_eq.sample_rate);
  report.validate();

  const auto digitized = noisesim::adc_quantize(m_eq, ec.adc);
  write_trace(dir / artifacts::kDigitized, digitized);
  write_json(dir / artifacts::kEntropyJson,
             {{"sigma_M", s.sigma_M},
              {"sigma_E", s.sigma_E},
              {"sigma_Q", s.sigma_Q},
              {"qcnr_db", report.qcnr},
              {"adc_bits", cfg.adc_bits},
              {"adc_range", range},
              {"ratio", range / s.sigma_Q},
              {"range_source", cfg.adc_range > 0.0 ? "config" : (cfg.range_objective == entropy::Objective::Average ? "optimum_avg" : "optimum_worst")},
              {"beta", cfg.beta},
              {"tolerance", cfg.tolerance},
              {"h_avg", report.h_avg},
              {"h_worst", report.h_worst},
              {"sample_rate", report.sample_rate},
              {"rate_avg", report.rate_avg},
              {"rate_worst", report.rate_worst},
              {"optimum_avg", optimum_json(best_avg)},
              {"optimum_worst", optimum_json(best_worst)},
              {"saturation_count", digitized.saturation_count}});
}

void stage_extract(const PipelineConfig& cfg) {
  const fs::path& dir = cfg.output_dir;
  const auto ent = read_json(dir / artifacts::kEntropyJson);
  if (!fs::exists(dir / artifacts::kDigitized)) throw Error("missing artifact digitized.vqt (run the entropy stage first)");
  const auto trace = std::get<DigitizedTrace>(read_trace(dir / artifacts::kDigitized));
  const int bits = trace.adc.bits;
  const double h = cfg.h_source == entropy::Objective::Average ? ent["h_avg"].get<double>() : ent["h_worst"].get<double>();

  const std::size_t n_in = cfg.block_samples * static_cast<std::size_t>(bits);
  const std::size_t m_out = extract::output_length(n_in, h, bits, cfg.epsilon);
  if (m_out == 0) throw Error("entropy too low for any output at extract.epsilon");
  const auto spec = [&] {
    if (cfg.toeplitz_seed_file.empty()) return extract::ToeplitzSpec::from_seed64(n_in, m_out, cfg.toeplitz_seed());
    if (!fs::exists(cfg.toeplitz_seed_file)) throw Error("extract.seed_file: no such file " + cfg.toeplitz_seed_file.string());
    const auto seed_bits = read_bits(cfg.toeplitz_seed_file);
    if (seed_bits.size() < n_in + m_out - 1) throw Error("extract.seed_file: seed shorter than n_in + m_out - 1 bits");
    return extract::ToeplitzSpec(n_in, m_out, seed_bits.slice(0, n_in + m_out - 1));
  }();

  const auto raw = pack_codes_to_bits(trace, bits);
  if (raw.size() < n_in) throw Error("fewer digitized bits than one extraction block");
  const auto result = extract::extract_stream(raw, spec);
  write_bits(dir / artifacts::kExtracted, result.output);
  write_json(dir / artifacts::kExtractJson,
             {{"n_in", n_in},
              {"m_out", m_out},
              {"blocks", result.blocks},
              {"input_bits", raw.size()},
              {"output_bits", result.output.size()},
              {"discarded_bits", result.discarded_bits},
              {"bits_per_sample", bits},
              {"h_source", cfg.h_source == entropy::Objective::Average ? "avg" : "worst"},
              {"h_min_per_sample", h},
              {"epsilon", cfg.epsilon},
              {"seed_source", cfg.toeplitz_seed_file.empty() ? "derived" : "file"}});
}

void stage_test(const PipelineConfig& cfg) {
  const fs::path& dir = cfg.output_dir;
  const auto meta = read_json(dir / artifacts::kExtractJson);
  if (!fs::exists(dir / artifacts::kExtracted)) throw Error("missing artifact extracted.bin (run the extract stage first)");
  auto bits = read_bits(dir / artifacts::kExtracted);
  std::size_t usable = std::min<std::size_t>(bits.size(), meta["output_bits"].get<std::size_t>());
  if (cfg.max_sequences > 0) usable = std::min(usable, cfg.max_sequences * cfg.sequence_len);
  usable -= usable % cfg.sequence_len;
  if (usable == 0) throw Error("fewer extracted bits than one test sequence");
  const auto report = rndtest::run_battery(bits.slice(0, usable), cfg.sequence_len, cfg.alpha);
  write_text(dir / artifacts::kTestJson, report.to_json());
  write_text(dir / artifacts::kTestText, report.to_text());
}

void run_stage(const PipelineConfig& cfg, Stage stage) {
  try {
    switch (stage) {
      case Stage::Config: cfg.validate(); break;
      case Stage::Simulate: stage_simulate(cfg); break;
      case Stage::Characterize: stage_characterize(cfg); break;
      case Stage::Equalize: stage_equalize(cfg); break;
      case Stage::Entropy: stage_entropy(cfg); break;
      case Stage::Extract: stage_extract(cfg); break;
      case Stage::Test: stage_test(cfg); break;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

// Config lines that cannot change any artifact.
std::string reproducible_config(const PipelineConfig& cfg) {
  std::istringstream in(format_config(cfg));
  std::string out, line;
  while (std::getline(in, line))
    if (!line.starts_with("run.output_dir") && !line.starts_with("run.threads")) out += line + "\n";
  return out;
}

}  // namespace

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Config: return "config";
    case Stage::Simulate: return "simulate";
    case Stage::Characterize: return "characterize";
    case Stage::Equalize: return "equalize";
    case Stage::Entropy: return "entropy";
    case Stage::Extract: return "extract";
    case Stage::Test: return "test";
  }
  return "unknown";
}

int exit_code(Stage stage) { return 2 + static_cast<int>(stage); }

Stage parse_stage(std::string_view name) {
  for (Stage s : {Stage::Config, Stage::Simulate, Stage::Characterize, Stage::Equalize, Stage::Entropy, Stage::Extract,
                  Stage::Test})
    if (to_string(s) == name) return s;
  throw StageError(Stage::Config, "unknown stage '" + std::string(name) + "'");
}

StageError::StageError(Stage stage, const std::string& what)
    : Error(std::string(to_string(stage)) + ": " + what), stage_(stage) {}

void run_stages(const PipelineConfig& cfg, const std::vector<Stage>& stages) {
  run_stage(cfg, Stage::Config);
  set_thread_count(cfg.threads);
  try {
    fs::create_directories(cfg.output_dir);
    write_text(cfg.output_dir / artifacts::kConfig, reproducible_config(cfg));
  } catch (const std::exception& e) {
    throw StageError(Stage::Config, std::string("output directory: ") + e.what());
  }
  for (Stage s : stages) run_stage(cfg, s);
}

std::string write_summary(const PipelineConfig& cfg) {
  const fs::path& dir = cfg.output_dir;
  auto load = [&](const char* name) -> json {
    std::ifstream in(dir / name);
    return in ? json::parse(in) : json();
  };
  const auto det = load(artifacts::kDetectorJson);
  const auto eq = load(artifacts::kEqualizeJson);
  const auto ent = load(artifacts::kEntropyJson);
  const auto ext = load(artifacts::kExtractJson);
  const auto tst = load(artifacts::kTestJson);

  json s;
  s["seed"] = cfg.seed;
  if (!det.is_null()) {
    s["detector"] = {{"u_M", det["u_M"]}, {"u_E", det["u_E"]},   {"R_F", det["R_F"]},
                     {"I_E", det["I_E"]}, {"nep", det["nep"]},   {"f_3dB", det["f_3dB"]},
                     {"qcnr_pre_db", det["qcnr"]}, {"qcnr_density_db", det["qcnr_density"]}};
  }
  if (!eq.is_null()) {
    s["equalization"] = {{"qcnr_post_db", eq["qcnr_post_db"]},
                         {"rho1_pre", eq["rho1_pre"]},
                         {"rho1_post", eq["rho1_post"]},
                         {"kurtosis_post", eq["moments_post"]["kurtosis"]},
                         {"skewness_post", eq["moments_post"]["skewness"]},
                         {"psd_flatness_db", eq["psd_flatness_db"]}};
  }
  if (!ent.is_null()) {
    s["entropy"] = {{"sigma_Q", ent["sigma_Q"]},
                    {"sigma_E", ent["sigma_E"]},
                    {"qcnr_db", ent["qcnr_db"]},
                    {"h_avg", ent["h_avg"]},
                    {"h_worst", ent["h_worst"]},
                    {"S", ent["adc_range"]},
                    {"ratio", ent["ratio"]},
                    {"ratio_opt_avg", ent["optimum_avg"]["ratio"]},
                    {"ratio_opt_worst", ent["optimum_worst"]["ratio"]},
                    {"rate_avg", ent["rate_avg"]},
                    {"rate_worst", ent["rate_worst"]}};
  }
  if (!ext.is_null()) {
    s["extraction"] = {{"n_in", ext["n_in"]}, {"m_out", ext["m_out"]}, {"blocks", ext["blocks"]},
                       {"output_bits", ext["output_bits"]}};
  }
  if (!tst.is_null()) {
    json props = json::object();
    for (const auto& t : tst["tests"]) props[t["name"].get<std::string>()] = t["proportion"];
    s["tests"] = {{"sequences", tst["sequences"]},
                  {"proportion_band", tst["proportion_band"]},
                  {"all_passed", tst["all_passed"]},
                  {"proportions", props}};
  }
  const auto text = s.dump(2) + "\n";
  write_text(dir / artifacts::kSummary, text);
  return text;
}

std::string run_pipeline(const PipelineConfig& cfg) {
  run_stages(cfg, kAllStages);
  return write_summary(cfg);
}

}  // namespace vqrng
