#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "vqrng/philox.hpp"
#include "vqrng/pipeline.hpp"

namespace vqrng {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) throw Error("not a number: '" + std::string(v) + "'");
  return out;
}

std::uint64_t to_u64(std::string_view v) {
  std::uint64_t out = 0;
  int base = 10;
  if (v.starts_with("0x") || v.starts_with("0X")) {
    v.remove_prefix(2);
    base = 16;
  }
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out, base);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty())
    throw Error("not a non-negative integer: '" + std::string(v) + "'");
  return out;
}

std::string objective_name(entropy::Objective o) { return o == entropy::Objective::Average ? "avg" : "worst"; }

entropy::Objective to_objective(std::string_view v) {
  if (v == "avg" || v == "average") return entropy::Objective::Average;
  if (v == "worst") return entropy::Objective::Worst;
  throw Error("expected avg or worst, got '" + std::string(v) + "'");
}

struct Field {
  std::function<void(PipelineConfig&, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <class T>
Field number(T PipelineConfig::*member) {
  return {[member](PipelineConfig& c, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) c.*member = to_double(v);
            else c.*member = static_cast<T>(to_u64(v));
          },
          [member](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <class T>
Field model_number(T noisesim::DetectorModel::*member) {
  return {[member](PipelineConfig& c, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) c.model.*member = to_double(v);
            else c.model.*member = static_cast<T>(to_u64(v));
          },
          [member](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.model.*member);
            else return std::to_string(c.model.*member);
          }};
}

Field detector_number(double detchar::CharacterizeOptions::*member) {
  return {[member](PipelineConfig& c, std::string_view v) { c.detector.*member = to_double(v); },
          [member](const PipelineConfig& c) { return format_double(c.detector.*member); }};
}

Field path(std::filesystem::path PipelineConfig::*member) {
  return {[member](PipelineConfig& c, std::string_view v) { c.*member = std::string(v); },
          [member](const PipelineConfig& c) { return (c.*member).string(); }};
}

Field objective(entropy::Objective PipelineConfig::*member) {
  return {[member](PipelineConfig& c, std::string_view v) { c.*member = to_objective(v); },
          [member](const PipelineConfig& c) { return objective_name(c.*member); }};
}

const std::map<std::string, Field, std::less<>>& registry() {
  static const std::map<std::string, Field, std::less<>> fields{
      {"run.seed", number(&PipelineConfig::seed)},
      {"run.output_dir", path(&PipelineConfig::output_dir)},
      {"run.threads", number(&PipelineConfig::threads)},
      {"simulate.samples", number(&PipelineConfig::samples)},
      {"simulate.sigma_q", model_number(&noisesim::DetectorModel::sigma_q)},
      {"simulate.sigma_e", model_number(&noisesim::DetectorModel::sigma_e)},
      {"simulate.lpf_band_qcnr_db",
       {[](PipelineConfig& c, std::string_view v) {
          if (v == "none") c.qcnr_db.reset();
          else c.qcnr_db = to_double(v);
        },
        [](const PipelineConfig& c) { return c.qcnr_db ? format_double(*c.qcnr_db) : std::string("none"); }}},
      {"simulate.f3db", model_number(&noisesim::DetectorModel::f3db)},
      {"simulate.electronic_f3db", model_number(&noisesim::DetectorModel::electronic_f3db)},
      {"simulate.f_lpf", model_number(&noisesim::DetectorModel::f_lpf)},
      {"simulate.shape",
       {[](PipelineConfig& c, std::string_view v) {
          if (v == "two-pole") c.model.shape = noisesim::ResponseShape::TwoPole;
          else if (v == "single-pole") c.model.shape = noisesim::ResponseShape::SinglePole;
          else throw Error("expected two-pole or single-pole, got '" + std::string(v) + "'");
        },
        [](const PipelineConfig& c) {
          return std::string(c.model.shape == noisesim::ResponseShape::TwoPole ? "two-pole" : "single-pole");
        }}},
      {"simulate.sample_rate", model_number(&noisesim::DetectorModel::sample_rate)},
      {"simulate.filter_taps", model_number(&noisesim::DetectorModel::filter_taps)},
      {"input.measured", path(&PipelineConfig::measured_input)},
      {"input.electronic", path(&PipelineConfig::electronic_input)},
      {"characterize.f_cut", number(&PipelineConfig::f_cut)},
      {"characterize.reference_low",
       {[](PipelineConfig& c, std::string_view v) { c.detector.reference_band.first = to_double(v); },
        [](const PipelineConfig& c) { return format_double(c.detector.reference_band.first); }}},
      {"characterize.reference_high",
       {[](PipelineConfig& c, std::string_view v) { c.detector.reference_band.second = to_double(v); },
        [](const PipelineConfig& c) { return format_double(c.detector.reference_band.second); }}},
      {"characterize.impedance", detector_number(&detchar::CharacterizeOptions::impedance)},
      {"characterize.photocurrent", detector_number(&detchar::CharacterizeOptions::photocurrent)},
      {"characterize.responsivity", detector_number(&detchar::CharacterizeOptions::responsivity)},
      {"characterize.psd_segment_len", number(&PipelineConfig::psd_segment_len)},
      {"equalize.f_eq", number(&PipelineConfig::f_eq)},
      {"equalize.taps", number(&PipelineConfig::eq_taps)},
      {"equalize.floor_db", number(&PipelineConfig::eq_floor_db)},
      {"equalize.acf_lags", number(&PipelineConfig::acf_lags)},
      {"adc.bits", number(&PipelineConfig::adc_bits)},
      {"adc.range", number(&PipelineConfig::adc_range)},
      {"entropy.range_objective", objective(&PipelineConfig::range_objective)},
      {"entropy.beta", number(&PipelineConfig::beta)},
      {"entropy.tolerance", number(&PipelineConfig::tolerance)},
      {"entropy.sweep_lo", number(&PipelineConfig::sweep_lo)},
      {"entropy.sweep_hi", number(&PipelineConfig::sweep_hi)},
      {"entropy.sweep_step", number(&PipelineConfig::sweep_step)},
      {"extract.block_samples", number(&PipelineConfig::block_samples)},
      {"extract.epsilon", number(&PipelineConfig::epsilon)},
      {"extract.h_source", objective(&PipelineConfig::h_source)},
      {"extract.seed_file", path(&PipelineConfig::toeplitz_seed_file)},
      {"test.sequence_len", number(&PipelineConfig::sequence_len)},
      {"test.max_sequences", number(&PipelineConfig::max_sequences)},
      {"test.alpha", number(&PipelineConfig::alpha)},
  };
  return fields;
}

void set_field(PipelineConfig& cfg, std::string_view key, std::string_view value) {
  const auto it = registry().find(key);
  if (it == registry().end()) throw StageError(Stage::Config, "unknown config key '" + std::string(key) + "'");
  try {
    it->second.set(cfg, value);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(Stage::Config, std::string(key) + ": " + e.what());
  }
}

}  // namespace

void apply_override(PipelineConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw StageError(Stage::Config, "expected key=value, got '" + std::string(assignment) + "'");
  set_field(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

PipelineConfig parse_config(std::string_view text, PipelineConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_override(base, line);
    } catch (const StageError& e) {
      throw StageError(Stage::Config, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& file, PipelineConfig base) {
  std::ifstream in(file);
  if (!in) throw StageError(Stage::Config, "cannot open config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string format_config(const PipelineConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : registry()) out += key + " = " + field.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : registry()) keys.push_back(key);
  return keys;
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& what) { throw StageError(Stage::Config, what); };
  try {
    effective_model().validate();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    fail(std::string("simulate: ") + e.what());
  }
  const double nyquist = model.sample_rate / 2.0;
  if (measured_input.empty() != electronic_input.empty())
    fail("input.measured and input.electronic must be given together");
  if (measured_input.empty() && samples < 4 * (model.filter_taps + eq_taps))
    fail("simulate.samples too small for the filters");
  if (!(f_cut > 0.0) || f_cut >= nyquist) fail("characterize.f_cut must be in (0, Nyquist)");
  if (!(detector.reference_band.first < detector.reference_band.second))
    fail("characterize.reference_low must be below characterize.reference_high");
  if (!(detector.impedance > 0.0)) fail("characterize.impedance must be positive");
  if (!(detector.photocurrent > 0.0)) fail("characterize.photocurrent must be positive");
  if (!(detector.responsivity > 0.0)) fail("characterize.responsivity must be positive");
  if (psd_segment_len < 16) fail("characterize.psd_segment_len must be at least 16");
  if (!(f_eq > 0.0) || f_eq >= nyquist) fail("equalize.f_eq must be in (0, Nyquist)");
  if (eq_taps < 3 || eq_taps % 2 == 0) fail("equalize.taps must be odd and >= 3");
  if (acf_lags < 1) fail("equalize.acf_lags must be positive");
  if (adc_bits < 1 || adc_bits > 16) fail("adc.bits must be in [1, 16]");
  if (!(adc_range >= 0.0)) fail("adc.range must be non-negative");
  if (!(beta > 0.0)) fail("entropy.beta must be positive");
  if (!(tolerance > 0.0) || tolerance > 1e-3) fail("entropy.tolerance must be in (0, 1e-3]");
  if (!(sweep_lo > 0.0) || !(sweep_hi > sweep_lo) || !(sweep_step > 0.0))
    fail("entropy sweep needs 0 < sweep_lo < sweep_hi and sweep_step > 0");
  if (block_samples < 1) fail("extract.block_samples must be positive");
  if (!(epsilon > 0.0) || epsilon > 1.0) fail("extract.epsilon must be in (0, 1]");
  if (sequence_len < 100) fail("test.sequence_len must be at least 100");
  if (!(alpha > 0.0) || !(alpha < 1.0)) fail("test.alpha must be in (0, 1)");
}

noisesim::DetectorModel PipelineConfig::effective_model() const {
  auto m = model;
  m.seed = derive_seed(seed, 1);
  if (qcnr_db) m = noisesim::with_lpf_band_qcnr(m, *qcnr_db, f_cut);
  return m;
}

std::uint64_t PipelineConfig::toeplitz_seed() const { return derive_seed(seed, 2); }

PipelineConfig repro_paper_config() {
  PipelineConfig c;
  c.output_dir = "repro_paper_out";
  c.samples = 17000000;
  c.model.sigma_q = 0.0393;
  c.model.f3db = 2.4e9;
  c.model.electronic_f3db = 3.5e9;
  c.model.shape = noisesim::ResponseShape::TwoPole;
  c.model.sample_rate = 6.25e9;
  c.qcnr_db = 9.51;
  c.f_cut = 2.4e9;
  c.f_eq = 3e9;
  c.adc_bits = 12;
  c.max_sequences = 100;
  return c;
}

}  // namespace vqrng
