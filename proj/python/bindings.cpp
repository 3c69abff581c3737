#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vqrng/detchar.hpp"
#include "vqrng/dsp.hpp"
#include "vqrng/entropy.hpp"
#include "vqrng/extract.hpp"
#include "vqrng/noisesim.hpp"
#include "vqrng/parallel.hpp"
#include "vqrng/pipeline.hpp"
#include "vqrng/rndtest.hpp"

namespace py = pybind11;
using namespace vqrng;

namespace {

using Doubles = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Bits = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

template <class T>
py::array_t<T> to_numpy(std::vector<T> v) {
  auto* heap = new std::vector<T>(std::move(v));
  py::capsule owner(heap, [](void* p) { delete static_cast<std::vector<T>*>(p); });
  return py::array_t<T>(static_cast<py::ssize_t>(heap->size()), heap->data(), owner);
}

std::span<const double> view(const Doubles& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-d array");
  return {a.data(), static_cast<std::size_t>(a.size())};
}

BitStream to_bitstream(const Bits& a) {
  BitStream out;
  const auto* p = a.data();
  for (py::ssize_t i = 0; i < a.size(); ++i) out.push_back(p[i] != 0);
  return out;
}

py::array_t<std::uint8_t> to_array(const BitStream& b) {
  std::vector<std::uint8_t> v(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) v[i] = b.get(i);
  return to_numpy(std::move(v));
}

entropy::EntropyConfig entropy_config(double sigma_q, double sigma_e, int bits, double range, double beta,
                                      double tolerance) {
  return {sigma_q, sigma_e, AdcConfig{bits, range}, beta, tolerance};
}

entropy::Objective objective(const std::string& s) {
  if (s == "avg") return entropy::Objective::Average;
  if (s == "worst") return entropy::Objective::Worst;
  throw py::value_error("objective must be 'avg' or 'worst'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Vacuum-noise QRNG post-processing core";

  py::register_exception<Error>(m, "VqrngError", PyExc_RuntimeError);

  m.def("set_thread_count", &set_thread_count, py::arg("threads"));

  py::enum_<noisesim::ResponseShape>(m, "ResponseShape")
      .value("SINGLE_POLE", noisesim::ResponseShape::SinglePole)
      .value("TWO_POLE", noisesim::ResponseShape::TwoPole);

  py::class_<noisesim::DetectorModel>(m, "DetectorModel")
      .def(py::init<>())
      .def_readwrite("sigma_q", &noisesim::DetectorModel::sigma_q)
      .def_readwrite("sigma_e", &noisesim::DetectorModel::sigma_e)
      .def_readwrite("f3db", &noisesim::DetectorModel::f3db)
      .def_readwrite("electronic_f3db", &noisesim::DetectorModel::electronic_f3db)
      .def_readwrite("f_lpf", &noisesim::DetectorModel::f_lpf)
      .def_readwrite("shape", &noisesim::DetectorModel::shape)
      .def_readwrite("sample_rate", &noisesim::DetectorModel::sample_rate)
      .def_readwrite("seed", &noisesim::DetectorModel::seed)
      .def_readwrite("filter_taps", &noisesim::DetectorModel::filter_taps)
      .def("programmed_qcnr_db", &noisesim::DetectorModel::programmed_qcnr_db)
      .def("lpf_band_qcnr_db", [](const noisesim::DetectorModel& d, double f_cut) {
        return noisesim::lpf_band_qcnr_db(d, f_cut);
      })
      .def("with_lpf_band_qcnr", [](const noisesim::DetectorModel& d, double qcnr_db, double f_cut) {
        return noisesim::with_lpf_band_qcnr(d, qcnr_db, f_cut);
      });

  m.def(
      "generate",
      [](const noisesim::DetectorModel& model, std::size_t count, std::uint64_t start) {
        NoiseTrace mea, ele;
        {
          py::gil_scoped_release release;
          mea = noisesim::generate_measured(model, start, count);
          ele = noisesim::generate_electronic(model, start, count);
        }
        return py::make_tuple(to_numpy(std::move(mea.samples)), to_numpy(std::move(ele.samples)));
      },
      py::arg("model"), py::arg("count"), py::arg("start") = 0,
      "Measured and electronic samples [start, start + count).");

  m.def(
      "quantize",
      [](const Doubles& x, int bits, double range) {
        NoiseTrace t{std::vector<double>(view(x).begin(), view(x).end()), 1.0, ""};
        return to_numpy(noisesim::adc_quantize(t, AdcConfig{bits, range}).codes);
      },
      py::arg("samples"), py::arg("bits"), py::arg("range"));

  // detchar
  m.def("dbm_to_density", &detchar::dbm_to_density, py::arg("p_dbm"), py::arg("rbw"), py::arg("impedance") = 50.0);
  m.def("density_to_dbm", &detchar::density_to_dbm, py::arg("u"), py::arg("rbw"), py::arg("impedance") = 50.0);
  m.def("shot_current_density", &detchar::shot_current_density, py::arg("photocurrent"));
  m.def("equivalent_transimpedance", &detchar::equivalent_transimpedance, py::arg("u_m"), py::arg("u_e"),
        py::arg("i_q"));
  m.def("qcnr_from_variances", &detchar::qcnr_from_variances, py::arg("var_q"), py::arg("var_e"));
  m.def("nep", &detchar::nep, py::arg("equiv_electronic_current"), py::arg("responsivity"));
  m.def("equivalent_electronic_current", &detchar::equivalent_electronic_current, py::arg("u_e"), py::arg("r_f"));

  // dsp
  m.def(
      "welch_psd",
      [](const Doubles& x, double fs, std::size_t segment_len) {
        dsp::WelchOptions o;
        o.segment_len = segment_len;
        auto s = dsp::welch_psd(view(x), fs, o);
        return py::make_tuple(to_numpy(std::move(s.frequencies)), to_numpy(std::move(s.values)), s.rbw);
      },
      py::arg("samples"), py::arg("sample_rate"), py::arg("segment_len") = 16384,
      "(frequencies, psd in V^2/Hz, rbw)");
  m.def(
      "autocorrelation", [](const Doubles& x, std::size_t lags) { return to_numpy(dsp::autocorrelation(view(x), lags)); },
      py::arg("samples"), py::arg("max_lag"));
  m.def(
      "moments",
      [](const Doubles& x) {
        const auto r = dsp::moments(view(x));
        return py::dict(py::arg("mean") = r.mean, py::arg("std") = r.std, py::arg("skewness") = r.skewness,
                        py::arg("kurtosis") = r.kurtosis);
      },
      py::arg("samples"));
  m.def(
      "design_lowpass",
      [](double f_c, double fs, std::size_t taps) { return to_numpy(dsp::design_lowpass(f_c, fs, taps).taps); },
      py::arg("f_c"), py::arg("sample_rate"), py::arg("taps") = 255);
  m.def(
      "apply_fir",
      [](const Doubles& x, const Doubles& taps) {
        dsp::FirFilter f;
        f.taps.assign(view(taps).begin(), view(taps).end());
        return to_numpy(dsp::apply_fir(view(x), f));
      },
      py::arg("samples"), py::arg("taps"));

  // entropy
  m.def(
      "avg_min_entropy",
      [](double sq, double se, int bits, double range, double beta, double tol) {
        return entropy::avg_min_entropy(entropy_config(sq, se, bits, range, beta, tol));
      },
      py::arg("sigma_q"), py::arg("sigma_e"), py::arg("bits"), py::arg("range"), py::arg("beta") = 5.0,
      py::arg("tolerance") = 1e-8);
  m.def(
      "worst_min_entropy",
      [](double sq, double se, int bits, double range, double beta, double tol) {
        return entropy::worst_min_entropy(entropy_config(sq, se, bits, range, beta, tol));
      },
      py::arg("sigma_q"), py::arg("sigma_e"), py::arg("bits"), py::arg("range"), py::arg("beta") = 5.0,
      py::arg("tolerance") = 1e-8);
  m.def(
      "sweep_range",
      [](double sq, double se, int bits, std::vector<double> ratios, double beta) {
        std::vector<double> ha, hw;
        for (const auto& p : entropy::sweep_range(sq, se, bits, ratios, {beta, 1e-8})) {
          ha.push_back(p.h_avg);
          hw.push_back(p.h_worst);
        }
        return py::make_tuple(to_numpy(std::move(ha)), to_numpy(std::move(hw)));
      },
      py::arg("sigma_q"), py::arg("sigma_e"), py::arg("bits"), py::arg("ratios"), py::arg("beta") = 5.0,
      "(h_avg, h_worst) per ratio S/sigma_Q");
  m.def(
      "optimal_range",
      [](double sq, double se, int bits, const std::string& obj, double beta) {
        const auto o = entropy::optimal_range(sq, se, bits, objective(obj), {beta, 1e-8});
        return py::dict(py::arg("ratio") = o.ratio, py::arg("range") = o.range, py::arg("entropy") = o.entropy,
                        py::arg("unimodal") = o.unimodal);
      },
      py::arg("sigma_q"), py::arg("sigma_e"), py::arg("bits"), py::arg("objective") = "avg", py::arg("beta") = 5.0);
  m.def("extractable_rate", &entropy::extractable_rate, py::arg("h"), py::arg("sample_rate"));

  // extract
  m.def("output_length", &extract::output_length, py::arg("n_in"), py::arg("h_min_per_sample"),
        py::arg("bits_per_sample"), py::arg("epsilon"));
  m.def(
      "toeplitz_extract",
      [](const Bits& input, const Bits& seed, std::size_t n_in, std::size_t m_out) {
        const extract::ToeplitzSpec spec(n_in, m_out, to_bitstream(seed));
        return to_array(extract::extract_stream(to_bitstream(input), spec).output);
      },
      py::arg("bits"), py::arg("seed"), py::arg("n_in"), py::arg("m_out"),
      "Blockwise Toeplitz hash; seed has n_in + m_out - 1 bits.");

  // rndtest
  m.def("monobit_p", [](const Bits& b) { return rndtest::monobit_p(to_bitstream(b)); }, py::arg("bits"));
  m.def(
      "run_battery",
      [](const Bits& b, std::size_t sequence_len, double alpha) {
        return rndtest::run_battery(to_bitstream(b), sequence_len, alpha).to_json();
      },
      py::arg("bits"), py::arg("sequence_len") = 1000000, py::arg("alpha") = 0.01, "Report as a JSON string.");

  // pipeline
  m.def(
      "run_pipeline",
      [](const std::string& config_text, const std::string& output_dir) {
        auto cfg = parse_config(config_text);
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        py::gil_scoped_release release;
        return run_pipeline(cfg);
      },
      py::arg("config_text") = "", py::arg("output_dir") = "", "Runs every stage; returns summary JSON.");
  m.def("repro_paper_config", [] { return format_config(repro_paper_config()); });
}
