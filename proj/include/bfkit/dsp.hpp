// Envelope spectrum analysis of vibration windows: zero-phase Butterworth
// bandpass, analytic-signal envelope, FFT magnitude, amplitude readout at
// characteristic frequencies.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <string>
#include <vector>

#include "bfkit/common.hpp"
#include "bfkit/fft.hpp"

namespace bfkit::dsp {

struct TimeSeries {
  std::vector<double> samples;
  double sample_rate_hz = 0.0;

  void validate() const {
    if (samples.empty()) throw ConfigError("time series: samples must be non-empty");
    if (sample_rate_hz <= 0.0) throw ConfigError("time series: sample rate must be positive");
  }
};

struct BandpassSpec {
  double low_cut_hz = 0.0;
  double high_cut_hz = 0.0;
  int order = 4;  // pole count of the bandpass; must be even

  void validate(double sample_rate_hz) const {
    if (order < 2 || order % 2 != 0)
      throw ConfigError("bandpass: order must be a positive even integer");
    if (!(0.0 < low_cut_hz && low_cut_hz < high_cut_hz &&
          high_cut_hz < sample_rate_hz / 2.0))
      throw ConfigError("bandpass: need 0 < low < high < Nyquist (fs=" +
                        std::to_string(sample_rate_hz) + " Hz)");
  }
};

struct EnvelopeSpectrum {
  std::vector<double> bin_frequencies_hz;  // starts at 0, strictly increasing
  std::vector<double> amplitudes;          // same length, nonnegative

  double bin_spacing_hz() const {
    return bin_frequencies_hz.size() >= 2 ? bin_frequencies_hz[1] : 0.0;
  }
};

namespace detail {

struct Biquad {
  double b0, b1, b2;  // numerator
  double a1, a2;      // denominator, a0 normalized to 1
};

// Butterworth bandpass as a cascade of order/2 biquads via the analog
// lowpass prototype, LP->BP transform and bilinear mapping.
inline std::vector<Biquad> design_bandpass(const BandpassSpec& spec, double fs) {
  spec.validate(fs);
  const int m = spec.order / 2;  // prototype order
  const double fs2 = 2.0 * fs;
  const double wl = fs2 * std::tan(M_PI * spec.low_cut_hz / fs);
  const double wh = fs2 * std::tan(M_PI * spec.high_cut_hz / fs);
  const double bw = wh - wl;
  const double w0sq = wl * wh;

  using cplx = std::complex<double>;
  std::vector<Biquad> sections;
  // Each section carries one zero at z=+1 and one at z=-1.
  auto add_conjugate_pair = [&](cplx q) {
    const cplx zp = (cplx(fs2, 0.0) + q) / (cplx(fs2, 0.0) - q);
    sections.push_back(Biquad{1.0, 0.0, -1.0, -2.0 * zp.real(), std::norm(zp)});
  };
  auto add_real_pair = [&](double q1, double q2) {
    const double z1 = (fs2 + q1) / (fs2 - q1);
    const double z2 = (fs2 + q2) / (fs2 - q2);
    sections.push_back(Biquad{1.0, 0.0, -1.0, -(z1 + z2), z1 * z2});
  };

  for (int k = 0; k < m; ++k) {
    const double theta = (2.0 * k + 1.0) * M_PI / (2.0 * m);
    const cplx proto(-std::sin(theta), std::cos(theta));
    if (proto.imag() < -1e-12) continue;  // conjugate handled with its partner
    const cplx pb = proto * bw;
    if (proto.imag() > 1e-12) {
      // complex prototype pole: the two bandpass roots are not conjugates of
      // each other; each pairs with its mirror from the conjugate prototype
      const cplx disc = std::sqrt(pb * pb - 4.0 * w0sq);
      add_conjugate_pair((pb + disc) * 0.5);
      add_conjugate_pair((pb - disc) * 0.5);
    } else {
      // real prototype pole (odd prototype order)
      const double d = pb.real() * pb.real() - 4.0 * w0sq;
      if (d < 0.0) {
        add_conjugate_pair(cplx(pb.real() * 0.5, 0.5 * std::sqrt(-d)));
      } else {
        const double root = std::sqrt(d);
        add_real_pair((pb.real() + root) * 0.5, (pb.real() - root) * 0.5);
      }
    }
  }

  // normalize so the response is unity at the warped center frequency
  const double theta_c = 2.0 * std::atan(std::sqrt(w0sq) / fs2);
  const cplx z1 = std::polar(1.0, -theta_c);
  const cplx z2 = z1 * z1;
  cplx h(1.0, 0.0);
  for (const auto& s : sections)
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  const double gain = std::abs(h);
  if (gain <= 0.0) throw NumericError("bandpass design: degenerate gain");
  const double correction = 1.0 / std::pow(gain, 1.0 / sections.size());
  for (auto& s : sections) {
    s.b0 *= correction;
    s.b1 *= correction;
    s.b2 *= correction;
  }
  return sections;
}

// One pass of a biquad over x, direct form II transposed, with steady-state
// initial conditions scaled by the first sample (suppresses edge transients).
inline void biquad_pass(const Biquad& s, std::vector<double>& x) {
  const double dc_den = 1.0 + s.a1 + s.a2;
  const double k = dc_den != 0.0 ? (s.b0 + s.b1 + s.b2) / dc_den : 0.0;
  const double zi1 = s.b1 + s.b2 - (s.a1 + s.a2) * k;
  const double zi2 = s.b2 - s.a2 * k;
  double s1 = zi1 * x[0];
  double s2 = zi2 * x[0];
  for (double& v : x) {
    const double in = v;
    const double out = s.b0 * in + s1;
    s1 = s.b1 * in - s.a1 * out + s2;
    s2 = s.b2 * in - s.a2 * out;
    v = out;
  }
}

}  // namespace detail

// Zero-phase bandpass: Butterworth cascade applied forward then backward
// over an odd-reflection padded copy of the signal.
inline TimeSeries bandpass_filter(const TimeSeries& x, const BandpassSpec& spec) {
  x.validate();
  const auto sections = detail::design_bandpass(spec, x.sample_rate_hz);
  const std::size_t n = x.samples.size();

  std::size_t pad = static_cast<std::size_t>(
      std::ceil(3.0 * x.sample_rate_hz / spec.low_cut_hz)) + 3 * spec.order;
  pad = std::min(pad, n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i)
    ext.push_back(2.0 * x.samples.front() - x.samples[pad - i]);
  ext.insert(ext.end(), x.samples.begin(), x.samples.end());
  for (std::size_t i = 0; i < pad; ++i)
    ext.push_back(2.0 * x.samples.back() - x.samples[n - 2 - i]);

  for (const auto& s : sections) detail::biquad_pass(s, ext);
  std::reverse(ext.begin(), ext.end());
  for (const auto& s : sections) detail::biquad_pass(s, ext);
  std::reverse(ext.begin(), ext.end());

  TimeSeries out;
  out.sample_rate_hz = x.sample_rate_hz;
  out.samples.assign(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                     ext.begin() + static_cast<std::ptrdiff_t>(pad + n));
  return out;
}

// Amplitude envelope |analytic signal| via the frequency-domain Hilbert
// transform: positive frequencies doubled, negative zeroed.
inline TimeSeries envelope(const TimeSeries& x) {
  x.validate();
  const std::size_t n = x.samples.size();
  if (n < 2) throw ConfigError("envelope: input must have at least 2 samples");

  auto spec = fft::transform_real(x.samples);
  const std::size_t half = n / 2;
  // positive frequencies doubled, DC (and Nyquist when n is even) unchanged
  for (std::size_t k = 1; k < (n + 1) / 2; ++k) spec[k] *= 2.0;
  for (std::size_t k = half + 1; k < n; ++k) spec[k] = 0.0;
  fft::inverse(spec);

  TimeSeries out;
  out.sample_rate_hz = x.sample_rate_hz;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = std::abs(spec[i]);
  return out;
}

// Bandpass -> envelope -> mean removal -> single-sided FFT magnitude.
// Bin k amplitude is scaled 2/N (1/N at DC); spacing is fs/N.
inline EnvelopeSpectrum envelope_spectrum(const TimeSeries& x, const BandpassSpec& band) {
  const TimeSeries env = envelope(bandpass_filter(x, band));
  const std::size_t n = env.samples.size();

  double mean = 0.0;
  for (double v : env.samples) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = env.samples[i] - mean;

  auto spec = fft::transform_real(centered);
  const std::size_t bins = n / 2 + 1;
  EnvelopeSpectrum out;
  out.bin_frequencies_hz.resize(bins);
  out.amplitudes.resize(bins);
  const double df = x.sample_rate_hz / static_cast<double>(n);
  for (std::size_t k = 0; k < bins; ++k) {
    out.bin_frequencies_hz[k] = df * static_cast<double>(k);
    const double scale = (k == 0) ? 1.0 / n : 2.0 / n;
    out.amplitudes[k] = scale * std::abs(spec[k]);
  }
  return out;
}

// Default readout half-width: at least one bin, at least 2% of the target.
inline double default_tolerance(const EnvelopeSpectrum& spec, double f_target_hz) {
  return std::max(spec.bin_spacing_hz(), 0.02 * f_target_hz);
}

// Max amplitude over bins within [f-tol, f+tol].
inline double amplitude_at(const EnvelopeSpectrum& spec, double f_target_hz,
                           double tolerance_hz) {
  if (f_target_hz <= 0.0) throw ConfigError("amplitude_at: target frequency must be positive");
  if (tolerance_hz <= 0.0) throw ConfigError("amplitude_at: tolerance must be positive");
  const auto& f = spec.bin_frequencies_hz;
  auto lo = std::lower_bound(f.begin(), f.end(), f_target_hz - tolerance_hz);
  auto hi = std::upper_bound(f.begin(), f.end(), f_target_hz + tolerance_hz);
  if (lo == hi)
    throw ConfigError("amplitude_at: no spectrum bins within +-" +
                      std::to_string(tolerance_hz) + " Hz of " +
                      std::to_string(f_target_hz) + " Hz");
  double best = 0.0;
  for (auto it = lo; it != hi; ++it)
    best = std::max(best, spec.amplitudes[static_cast<std::size_t>(it - f.begin())]);
  return best;
}

// p-th percentile with linear interpolation between closest ranks.
inline double percentile_threshold(std::vector<double> values, double p) {
  if (values.empty()) throw ConfigError("percentile: empty input");
  if (!(p > 0.0 && p < 100.0)) throw ConfigError("percentile: p must lie in (0, 100)");
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

// Debug dump: two-column CSV (frequency_hz, amplitude).
inline void write_spectrum_csv(const EnvelopeSpectrum& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open spectrum dump for writing: " + path);
  out << "frequency_hz,amplitude\n";
  out.precision(12);
  for (std::size_t i = 0; i < spec.bin_frequencies_hz.size(); ++i)
    out << spec.bin_frequencies_hz[i] << "," << spec.amplitudes[i] << "\n";
}

}  // namespace bfkit::dsp
