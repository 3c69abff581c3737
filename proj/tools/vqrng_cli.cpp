// vqrng: command line front end for the QRNG post-processing pipeline.
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vqrng/detchar.hpp"
#include "vqrng/dsp.hpp"
#include "vqrng/entropy.hpp"
#include "vqrng/extract.hpp"
#include "vqrng/noisesim.hpp"
#include "vqrng/parallel.hpp"
#include "vqrng/pipeline.hpp"
#include "vqrng/rndtest.hpp"

using namespace vqrng;
using json = nlohmann::ordered_json;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_file, "Config file (key = value lines)");
  app->add_option("-s,--set", c.overrides, "Override a config key, e.g. -s equalize.f_eq=3e9");
  app->add_option("-o,--out", c.out_dir, "Output directory");
  app->add_option("--seed", c.seed, "Global seed");
  app->add_option("-j,--threads", c.threads, "Worker threads (0: all cores)");
}

PipelineConfig resolve(const Common& c, PipelineConfig base = {}) {
  auto cfg = c.config_file.empty() ? base : load_config(c.config_file, base);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (!c.out_dir.empty()) cfg.output_dir = c.out_dir;
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  return cfg;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path);
}

void emit(const json& j, const std::string& path) {
  const auto text = j.dump(2) + "\n";
  if (path.empty()) std::cout << text;
  else write_file(path, text);
}

json report_json(const detchar::DetectorReport& r) {
  return {{"u_M", r.u_M}, {"u_E", r.u_E}, {"u_Q", r.u_Q}, {"i_Q", r.i_Q}, {"i_E", r.i_E},
          {"I_Q", r.I_Q}, {"I_E", r.I_E}, {"R_F", r.R_F}, {"qcnr", r.qcnr}, {"nep", r.nep},
          {"f_3dB", r.f_3dB}, {"responsivity", r.responsivity}};
}

void print_report(const detchar::DetectorReport& r) {
  std::fprintf(stderr,
               "u_M   %.4g V/rtHz\nu_E   %.4g V/rtHz\nu_Q   %.4g V/rtHz\ni_Q   %.4g A/rtHz\n"
               "R_F   %.4g ohm\nI_E   %.4g A\nNEP   %.4g W/rtHz\nQCNR  %.3f dB\nf_3dB %.4g Hz\n",
               r.u_M, r.u_E, r.u_Q, r.i_Q, r.R_F, r.I_E, r.nep, r.qcnr, r.f_3dB);
}

// Standalone equalization of one trace: equalized trace, before/after PSDs,
// autocorrelation and moments in the output directory.
void equalize_file(const PipelineConfig& cfg, const std::string& input) {
  const auto any = read_trace(input);
  NoiseTrace trace;
  if (const auto* d = std::get_if<DigitizedTrace>(&any)) trace = {d->dequantize(), d->sample_rate, "dequantized"};
  else trace = std::get<NoiseTrace>(any);

  const auto& dir = cfg.output_dir;
  dsp::WelchOptions w;
  w.segment_len = cfg.psd_segment_len;
  const auto psd_pre = dsp::welch_psd(trace, w);
  dsp::EqualizerOptions eo;
  eo.taps = cfg.eq_taps;
  eo.floor_db = cfg.eq_floor_db;
  eo.sample_rate = trace.sample_rate;
  const auto eq = dsp::design_equalizer(psd_pre, cfg.f_eq, eo);
  auto out = dsp::apply_fir(trace, eq);
  out.label = trace.label.empty() ? "equalized" : trace.label + " (equalized)";

  CsvTable taps{{"index", "tap"}, {}};
  for (std::size_t i = 0; i < eq.size(); ++i) taps.rows.push_back({static_cast<double>(i), eq.taps[i]});
  write_csv(dir / "equalizer.csv", taps);
  write_trace(dir / "equalized.vqt", out);
  write_spectrum_csv(dir / "psd_pre.csv", psd_pre);
  write_spectrum_csv(dir / "psd_post.csv", dsp::welch_psd(out, w));

  const auto rho_pre = dsp::autocorrelation(trace, cfg.acf_lags);
  const auto rho_post = dsp::autocorrelation(out, cfg.acf_lags);
  CsvTable acf{{"lag", "rho_pre", "rho_post"}, {}};
  for (std::size_t k = 0; k <= cfg.acf_lags; ++k) acf.rows.push_back({static_cast<double>(k), rho_pre[k], rho_post[k]});
  write_csv(dir / "autocorrelation.csv", acf);

  const auto pre = dsp::moments(trace), post = dsp::moments(out);
  CsvTable mom{{"equalized", "mean", "std", "skewness", "kurtosis"}, {}};
  mom.rows.push_back({0.0, pre.mean, pre.std, pre.skewness, pre.kurtosis});
  mom.rows.push_back({1.0, post.mean, post.std, post.skewness, post.kurtosis});
  write_csv(dir / "moments.csv", mom);

  emit({{"input", input}, {"f_eq", cfg.f_eq}, {"taps", eq.size()}, {"rho1_pre", rho_pre[1]}, {"rho1_post", rho_post[1]},
        {"kurtosis_post", post.kurtosis}, {"skewness_post", post.skewness}},
       "");
}

entropy::Objective objective_of(const std::string& s) {
  if (s == "avg" || s == "average") return entropy::Objective::Average;
  if (s == "worst") return entropy::Objective::Worst;
  throw Error("objective must be avg or worst");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vqrng: vacuum-noise QRNG simulation, characterization, entropy estimation and extraction"};
  app.require_subcommand(1);

  Stage current = Stage::Config;

  // Pipeline stages operating on an output directory.
  Common sim_c, char_c, eq_c, pipe_c, repro_c;
  auto* simulate = app.add_subcommand("simulate", "Generate measured and electronic noise traces");
  add_common(simulate, sim_c);
  std::optional<double> sim_sq_mv, sim_qcnr, sim_f3db, sim_lpf, sim_rate, sim_range_mv;
  std::optional<int> sim_bits;
  std::optional<std::size_t> sim_count;
  std::string sim_measured, sim_electronic, sim_digitized;
  simulate->add_option("--sigma-q", sim_sq_mv, "Quantum noise std (mV)");
  simulate->add_option("--qcnr", sim_qcnr, "QCNR after the characterize.f_cut low-pass (dB)");
  simulate->add_option("--f3db", sim_f3db, "Detector -3 dB frequency (Hz)");
  simulate->add_option("--lpf", sim_lpf, "Brick-wall cutoff (Hz)");
  simulate->add_option("--rate", sim_rate, "Sample rate (Hz)");
  simulate->add_option("--bits", sim_bits, "ADC bits for --digitized");
  simulate->add_option("--range", sim_range_mv, "ADC half-range S for --digitized (mV)");
  simulate->add_option("--count", sim_count, "Samples");
  simulate->add_option("--measured", sim_measured, "Write the measured trace here instead of the output directory");
  simulate->add_option("--electronic", sim_electronic, "Write the electronic trace here");
  simulate->add_option("--digitized", sim_digitized, "Write the ADC-quantized measured trace here");

  auto* characterize = app.add_subcommand("characterize", "Detector report from spectra or traces");
  add_common(characterize, char_c);
  std::string psd_m, psd_e, char_json;
  characterize->add_option("--measured-psd", psd_m, "Measured-noise spectrum CSV");
  characterize->add_option("--electronic-psd", psd_e, "Electronic-noise spectrum CSV");
  characterize->add_option("--json", char_json, "Write the report here (spectrum mode)");

  auto* equalize = app.add_subcommand("equalize", "Design and apply the whitening equalizer");
  add_common(equalize, eq_c);
  std::string eq_input;
  std::optional<double> eq_f, eq_floor;
  std::optional<std::size_t> eq_taps;
  equalize->add_option("--input", eq_input, "Equalize this trace file instead of the pipeline traces");
  equalize->add_option("--f-eq", eq_f, "Equalizer band edge (Hz)");
  equalize->add_option("--taps", eq_taps, "Equalizer length (odd)");
  equalize->add_option("--floor-db", eq_floor, "PSD floor relative to the passband median (dB)");

  auto* pipeline = app.add_subcommand("pipeline", "Run pipeline stages from a config");
  add_common(pipeline, pipe_c);
  std::vector<std::string> stage_names;
  pipeline->add_option("--stages", stage_names, "Stages to run (default: all)")->delimiter(',');

  auto* repro = app.add_subcommand("repro-paper", "Full pipeline with the reference detector preset");
  add_common(repro, repro_c);
  bool print_config = false;
  repro->add_flag("--print-config", print_config, "Print the preset config and exit");

  // Standalone tools.
  double sq = 0.0393, se = 0.0, range = 0.16, beta = 5.0, tol = 1e-8, rate = 0.0;
  int bits = 12;
  auto* ent = app.add_subcommand("entropy", "Min-entropy of one ADC configuration");
  ent->add_option("--sigma-q", sq, "Quantum noise std (V)")->required();
  ent->add_option("--sigma-e", se, "Electronic noise std (V)")->required();
  ent->add_option("--bits", bits, "ADC bits");
  ent->add_option("--range", range, "ADC half-range S (V)");
  ent->add_option("--beta", beta, "Worst-case bound |e| <= beta sigma_E");
  ent->add_option("--tolerance", tol, "Relative quadrature tolerance");
  ent->add_option("--sample-rate", rate, "Sample rate for bit rates (Hz)");
  std::string ent_json;
  ent->add_option("--json", ent_json, "Output file (default stdout)");

  double lo = 0.5, hi = 10.0, step = 0.05;
  std::string sweep_csv;
  auto* sweep = app.add_subcommand("sweep", "Entropy versus S/sigma_Q");
  sweep->add_option("--sigma-q", sq)->required();
  sweep->add_option("--sigma-e", se)->required();
  sweep->add_option("--bits", bits);
  sweep->add_option("--beta", beta);
  sweep->add_option("--tolerance", tol);
  sweep->add_option("--lo", lo);
  sweep->add_option("--hi", hi);
  sweep->add_option("--step", step);
  sweep->add_option("--csv", sweep_csv, "Output CSV")->required();

  std::string objective = "avg", opt_json;
  auto* optimize = app.add_subcommand("optimize", "ADC range maximizing min-entropy");
  optimize->add_option("--sigma-q", sq)->required();
  optimize->add_option("--sigma-e", se)->required();
  optimize->add_option("--bits", bits);
  optimize->add_option("--beta", beta);
  optimize->add_option("--tolerance", tol);
  optimize->add_option("--lo", lo);
  optimize->add_option("--hi", hi);
  optimize->add_option("--step", step);
  optimize->add_option("--objective", objective, "avg or worst");
  optimize->add_option("--json", opt_json);

  std::string ex_in, ex_out, ex_seed_file, ex_json;
  std::uint64_t ex_seed = 1;
  std::size_t n_in = 4096 * 12;
  double h_min = 0.0, bps = 12.0, eps = 0x1p-50;
  auto* ext = app.add_subcommand("extract", "Toeplitz-hash a raw bit file");
  ext->add_option("--input", ex_in, "Raw bits (packed, LSB first)")->required();
  ext->add_option("--output", ex_out, "Extracted bits")->required();
  ext->add_option("--seed-file", ex_seed_file, "Toeplitz seed bits");
  ext->add_option("--seed", ex_seed, "64-bit seed expanded by Philox (testing only)");
  ext->add_option("--n-in", n_in, "Input bits per block");
  ext->add_option("--h-min", h_min, "Min-entropy per sample (bits)")->required();
  ext->add_option("--bits-per-sample", bps);
  ext->add_option("--epsilon", eps);
  ext->add_option("--json", ex_json, "Sidecar (default <output>.json)");
  std::optional<unsigned> ex_threads;
  ext->add_option("-j,--threads", ex_threads);

  std::string t_in, t_json, t_text;
  std::size_t seq_len = 1000000, max_seq = 0;
  double alpha = 0.01;
  auto* test = app.add_subcommand("test", "Statistical test battery");
  test->add_option("--input", t_in, "Packed bit file")->required();
  test->add_option("--sequence-len", seq_len);
  test->add_option("--max-sequences", max_seq, "0: all whole sequences");
  test->add_option("--alpha", alpha);
  test->add_option("--json", t_json);
  test->add_option("--text", t_text);
  std::optional<unsigned> t_threads;
  test->add_option("-j,--threads", t_threads);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      auto cfg = resolve(sim_c);
      if (sim_sq_mv) cfg.model.sigma_q = *sim_sq_mv * 1e-3;
      if (sim_qcnr) cfg.qcnr_db = *sim_qcnr;
      if (sim_f3db) cfg.model.f3db = *sim_f3db;
      if (sim_lpf) cfg.model.f_lpf = *sim_lpf;
      if (sim_rate) cfg.model.sample_rate = *sim_rate;
      if (sim_count) cfg.samples = *sim_count;
      if (sim_bits) cfg.adc_bits = *sim_bits;
      if (sim_range_mv) cfg.adc_range = *sim_range_mv * 1e-3;
      if (sim_measured.empty() && sim_electronic.empty() && sim_digitized.empty()) {
        run_stages(cfg, {Stage::Simulate});
      } else {
        cfg.validate();
        current = Stage::Simulate;
        set_thread_count(cfg.threads);
        const auto pair = noisesim::generate(cfg.effective_model(), cfg.samples);
        if (!sim_measured.empty()) write_trace(sim_measured, pair.measured);
        if (!sim_electronic.empty()) write_trace(sim_electronic, pair.electronic);
        if (!sim_digitized.empty()) {
          if (!(cfg.adc_range > 0.0)) throw Error("--digitized needs --range");
          write_trace(sim_digitized, noisesim::adc_quantize(pair.measured, {cfg.adc_bits, cfg.adc_range}));
        }
      }
    } else if (*characterize) {
      if (!psd_m.empty() || !psd_e.empty()) {
        current = Stage::Characterize;
        if (psd_m.empty() || psd_e.empty()) throw Error("--measured-psd and --electronic-psd go together");
        const auto cfg = resolve(char_c);
        const auto r = detchar::characterize(read_spectrum_csv(psd_m), read_spectrum_csv(psd_e), cfg.detector);
        emit(report_json(r), char_json);
        print_report(r);
      } else {
        const auto cfg = resolve(char_c);
        run_stages(cfg, {Stage::Characterize});
        std::ifstream in(cfg.output_dir / artifacts::kDetectorJson);
        std::cout << in.rdbuf();
      }
    } else if (*equalize) {
      auto cfg = resolve(eq_c);
      if (eq_f) cfg.f_eq = *eq_f;
      if (eq_taps) cfg.eq_taps = *eq_taps;
      if (eq_floor) cfg.eq_floor_db = *eq_floor;
      if (eq_input.empty()) {
        run_stages(cfg, {Stage::Equalize});
      } else {
        current = Stage::Equalize;
        run_stages(cfg, {});
        equalize_file(cfg, eq_input);
      }
    } else if (*pipeline) {
      const auto cfg = resolve(pipe_c);
      if (stage_names.empty()) {
        std::cout << run_pipeline(cfg);
      } else {
        std::vector<Stage> stages;
        for (const auto& n : stage_names) stages.push_back(parse_stage(n));
        run_stages(cfg, stages);
        std::cout << write_summary(cfg);
      }
    } else if (*repro) {
      const auto cfg = resolve(repro_c, repro_paper_config());
      if (print_config) {
        std::cout << format_config(cfg);
        return 0;
      }
      std::cout << run_pipeline(cfg);
    } else if (*ent) {
      current = Stage::Entropy;
      const entropy::EntropyConfig cfg{sq, se, AdcConfig{bits, range}, beta, tol};
      const auto r = entropy::evaluate(cfg, rate);
      emit({{"h_avg", r.h_avg}, {"h_worst", r.h_worst}, {"bits", bits}, {"range", range},
            {"sigma_Q", sq}, {"sigma_E", se}, {"qcnr_db", r.qcnr}, {"beta", beta},
            {"rate_avg", r.rate_avg}, {"rate_worst", r.rate_worst}},
           ent_json);
    } else if (*sweep) {
      current = Stage::Entropy;
      const auto grid = entropy::ratio_grid(lo, hi, step);
      entropy::write_sweep_csv(sweep_csv, entropy::sweep_range(sq, se, bits, grid, {beta, tol}));
    } else if (*optimize) {
      current = Stage::Entropy;
      const auto grid = entropy::ratio_grid(lo, hi, step);
      const auto o = entropy::optimal_range(sq, se, bits, objective_of(objective), grid, {beta, tol});
      emit({{"objective", objective}, {"ratio", o.ratio}, {"S", o.range}, {"H", o.entropy}, {"unimodal", o.unimodal}},
           opt_json);
    } else if (*ext) {
      current = Stage::Extract;
      if (ex_threads) set_thread_count(*ex_threads);
      const std::size_t m_out = extract::output_length(n_in, h_min, bps, eps);
      if (m_out == 0) throw Error("no output at this entropy and epsilon");
      auto spec = ex_seed_file.empty()
                      ? extract::ToeplitzSpec::from_seed64(n_in, m_out, ex_seed)
                      : extract::ToeplitzSpec(n_in, m_out, read_bits(ex_seed_file).slice(0, n_in + m_out - 1));
      const auto input = read_bits(ex_in);
      const auto t0 = std::chrono::steady_clock::now();
      const auto r = extract::extract_stream(input, spec);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      write_bits(ex_out, r.output);
      emit({{"n_in", n_in}, {"m_out", m_out}, {"blocks", r.blocks}, {"output_bits", r.output.size()},
            {"discarded_bits", r.discarded_bits}, {"epsilon", eps}, {"h_min_per_sample", h_min},
            {"kernel", extract::kernel_name(extract::Kernel::Auto)},
            {"throughput_bits_per_s", secs > 0 ? static_cast<double>(r.blocks * n_in) / secs : 0.0}},
           ex_json.empty() ? ex_out + ".json" : ex_json);
    } else if (*test) {
      current = Stage::Test;
      if (t_threads) set_thread_count(*t_threads);
      auto input = read_bits(t_in);
      std::size_t usable = input.size() - input.size() % seq_len;
      if (max_seq > 0) usable = std::min(usable, max_seq * seq_len);
      if (usable == 0) throw Error("fewer bits than one sequence");
      const auto report = rndtest::run_battery(input.slice(0, usable), seq_len, alpha);
      if (!t_json.empty()) write_file(t_json, report.to_json());
      if (!t_text.empty()) write_file(t_text, report.to_text());
      std::cout << report.to_text();
      return report.all_passed() ? 0 : exit_code(Stage::Test);
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.stage());
  } catch (const std::exception& e) {
    std::cerr << "error: " << to_string(current) << ": " << e.what() << "\n";
    return exit_code(current);
  }
  return 0;
}
