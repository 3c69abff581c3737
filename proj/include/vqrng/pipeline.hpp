#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vqrng/detchar.hpp"
#include "vqrng/entropy.hpp"
#include "vqrng/error.hpp"
#include "vqrng/noisesim.hpp"

namespace vqrng {

enum class Stage { Config, Simulate, Characterize, Equalize, Entropy, Extract, Test };

std::string_view to_string(Stage stage);
// Process exit code for a failure in `stage` (2..8; 1 is left for usage errors).
int exit_code(Stage stage);

class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& what);
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "vqrng_out";
  unsigned threads = 0;  // 0: all cores

  // simulate
  std::size_t samples = std::size_t{1} << 22;
  noisesim::DetectorModel model;
  std::optional<double> qcnr_db;  // simulate.lpf_band_qcnr_db: QCNR after the f_cut LPF; sets sigma_e
  // Recorded traces instead of simulation.
  std::filesystem::path measured_input, electronic_input;

  // characterize
  double f_cut = 2.4e9;
  detchar::CharacterizeOptions detector;
  std::size_t psd_segment_len = std::size_t{1} << 14;

  // equalize
  double f_eq = 3e9;
  std::size_t eq_taps = 1025;
  double eq_floor_db = -40.0;
  std::size_t acf_lags = 32;

  // entropy
  int adc_bits = 12;
  double adc_range = 0.0;  // 0: optimise
  entropy::Objective range_objective = entropy::Objective::Worst;
  double beta = 5.0;
  double tolerance = 1e-8;
  double sweep_lo = 0.5, sweep_hi = 10.0, sweep_step = 0.05;

  // extract
  std::size_t block_samples = 4096;
  double epsilon = 0x1p-50;
  entropy::Objective h_source = entropy::Objective::Worst;
  std::filesystem::path toeplitz_seed_file;  // empty: seed derived from `seed`

  // test
  std::size_t sequence_len = 1000000;
  std::size_t max_sequences = 100;  // 0: every whole sequence
  double alpha = 0.01;

  void validate() const;
  // Detector model with seed and QCNR calibration applied.
  noisesim::DetectorModel effective_model() const;
  std::uint64_t toeplitz_seed() const;
};

// Flat `stage.parameter = value` lines, '#' comments.
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});
// `key=value` overrides applied on top of a config.
void apply_override(PipelineConfig& cfg, std::string_view assignment);
std::string format_config(const PipelineConfig& cfg);
std::vector<std::string> config_keys();

// sigma_Q 39.3 mV, 9.51 dB QCNR in the 2.4 GHz band, two-pole 2.4 GHz
// detector, 6.25 GS/s, 12-bit ADC, 3 GHz equalizer.
PipelineConfig repro_paper_config();

inline const std::vector<Stage> kAllStages{Stage::Simulate, Stage::Characterize, Stage::Equalize,
                                           Stage::Entropy, Stage::Extract, Stage::Test};

// Runs `stages` in order. Each stage reads its inputs from the output
// directory, so stages run in separate invocations give the same files.
// Throws StageError; files from completed stages are kept.
void run_stages(const PipelineConfig& cfg, const std::vector<Stage>& stages);

// All stages, then summary.json. Returns the summary text.
std::string run_pipeline(const PipelineConfig& cfg);

// summary.json from the stage reports present in the output directory.
std::string write_summary(const PipelineConfig& cfg);

Stage parse_stage(std::string_view name);

namespace artifacts {
inline constexpr const char* kMeasured = "measured.vqt";
inline constexpr const char* kElectronic = "electronic.vqt";
inline constexpr const char* kSimulateJson = "simulate.json";
inline constexpr const char* kPsdMeasured = "psd_measured.csv";
inline constexpr const char* kPsdElectronic = "psd_electronic.csv";
inline constexpr const char* kDetectorJson = "detector.json";
inline constexpr const char* kEqualizerTaps = "equalizer.csv";
inline constexpr const char* kMeasuredEq = "measured_eq.vqt";
inline constexpr const char* kElectronicEq = "electronic_eq.vqt";
inline constexpr const char* kPsdMeasuredEq = "psd_measured_eq.csv";
inline constexpr const char* kPsdElectronicEq = "psd_electronic_eq.csv";
inline constexpr const char* kAutocorrelation = "autocorrelation.csv";
inline constexpr const char* kMoments = "moments.csv";
inline constexpr const char* kEqualizeJson = "equalize.json";
inline constexpr const char* kSweep = "sweep.csv";
inline constexpr const char* kEntropyJson = "entropy.json";
inline constexpr const char* kDigitized = "digitized.vqt";
inline constexpr const char* kExtracted = "extracted.bin";
inline constexpr const char* kExtractJson = "extract.json";
inline constexpr const char* kTestJson = "test_report.json";
inline constexpr const char* kTestText = "test_report.txt";
inline constexpr const char* kSummary = "summary.json";
inline constexpr const char* kConfig = "config.txt";
}  // namespace artifacts

}  // namespace vqrng
