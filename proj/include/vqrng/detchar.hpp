#pragma once

#include <utility>

#include "vqrng/sigio.hpp"

namespace vqrng::detchar {

inline constexpr double kElectronCharge = 1.602176634e-19;  // C

using Band = std::pair<double, double>;  // Hz
inline constexpr Band kDefaultReferenceBand{50e6, 150e6};

// Noise power P (dBm in one RBW) <-> output voltage noise density u (V/sqrt(Hz)).
double dbm_to_density(double p_dbm, double rbw, double impedance);
double density_to_dbm(double u, double rbw, double impedance);

// sqrt(2 q (2 I)): shot noise of the two photodiodes, each carrying I.
double shot_current_density(double photocurrent);

// sqrt(u_M^2 - u_E^2) / i_Q
double equivalent_transimpedance(double u_m, double u_e, double i_q);

double qcnr_from_variances(double var_q, double var_e);
// 20 log10(u_Q / u_E) at a single frequency, u_Q = sqrt(u_M^2 - u_E^2).
double qcnr_from_densities(double u_m, double u_e);
// Both traces low-passed at f_cut (dsp::design_lowpass, lpf_taps), then
// var_Q = var(M) - var(E).
double qcnr_from_traces(const NoiseTrace& measured, const NoiseTrace& electronic, double f_cut,
                        std::size_t lpf_taps = 255);

double nep(double equiv_electronic_current, double responsivity);
// Photocurrent I_E with sqrt(2 q (2 I_E)) == u_E / R_F.
double equivalent_electronic_current(double u_e, double r_f);

// Lowest frequency above the reference band where the 51-point moving median
// of the power falls 3 dB below its mean over the band (linear interpolation
// between bins).
double bandwidth_3db(const Spectrum& spec, Band reference_band = kDefaultReferenceBand);

// Peak power within +-3 RBW bins of f_mod, unbalanced minus balanced, in dB.
double cmrr_from_spectra(const Spectrum& balanced, const Spectrum& unbalanced, double f_mod);

// Mean voltage noise density over a band.
double density_in_band(const Spectrum& spec, Band band, double impedance = 50.0);

struct DetectorReport {
  double u_M = 0, u_E = 0, u_Q = 0;  // V/sqrt(Hz)
  double i_Q = 0, i_E = 0;           // A/sqrt(Hz)
  double I_Q = 0, I_E = 0;           // A
  double R_F = 0;                    // ohm
  double qcnr = 0;                   // dB
  double nep = 0;                    // W/sqrt(Hz)
  double f_3dB = 0;                  // Hz
  double responsivity = 0;           // A/W

  void validate() const;
};

struct CharacterizeOptions {
  Band reference_band = kDefaultReferenceBand;
  double impedance = 50.0;
  double photocurrent = 1e-3;  // per photodiode, A
  double responsivity = 0.9;   // A/W
};

// Densities, R_F, I_E and NEP from a measured / electronic spectrum pair.
// qcnr here is the single-band density ratio.
DetectorReport characterize(const Spectrum& measured, const Spectrum& electronic,
                            const CharacterizeOptions& opt = {});

// Same from time traces (Welch PSDs), with the bandwidth-matched QCNR at f_cut.
DetectorReport characterize(const NoiseTrace& measured, const NoiseTrace& electronic, double f_cut,
                            const CharacterizeOptions& opt = {});

}  // namespace vqrng::detchar
