// Segment ingestion, standardization, dataset splitting, and the synthetic
// bearing-signal generator used as the desk-scale ground-truth oracle.
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "bfkit/common.hpp"
#include "bfkit/geometry.hpp"

namespace bfkit::dataio {

static_assert(std::endian::native == std::endian::little,
              "segment file I/O assumes a little-endian host");

enum class FaultLabel : std::uint8_t { Healthy = 0, InnerFault = 1, OuterFault = 2 };
inline constexpr int kNumClasses = 3;

inline const char* label_name(FaultLabel l) {
  switch (l) {
    case FaultLabel::Healthy: return "Healthy";
    case FaultLabel::InnerFault: return "InnerFault";
    case FaultLabel::OuterFault: return "OuterFault";
  }
  return "?";
}

inline FaultLabel label_from_name(const std::string& name) {
  if (name == "Healthy") return FaultLabel::Healthy;
  if (name == "InnerFault") return FaultLabel::InnerFault;
  if (name == "OuterFault") return FaultLabel::OuterFault;
  throw ConfigError("unknown class label: " + name);
}

// Fixed-length multichannel window. Channels are stored as f32 to match the
// on-disk format; DSP promotes to double.
struct SignalSegment {
  std::vector<float> vibration;
  std::vector<float> current_a;
  std::vector<float> current_b;
  FaultLabel label = FaultLabel::Healthy;
  geometry::OperatingCondition condition;
  double sample_rate_hz = 0.0;

  std::size_t window_len() const { return vibration.size(); }

  void validate() const {
    if (vibration.empty()) throw DataError("segment: empty window");
    if (current_a.size() != vibration.size() || current_b.size() != vibration.size())
      throw DataError("segment: channel lengths differ");
    if (sample_rate_hz <= 0.0) throw DataError("segment: nonpositive sample rate");
  }
};

// Continuous multichannel record, pre-windowing.
struct Recording {
  std::vector<double> vibration;
  std::vector<double> current_a;
  std::vector<double> current_b;
  double sample_rate_hz = 0.0;
  FaultLabel label = FaultLabel::Healthy;
  geometry::OperatingCondition condition;
};

// Sliding-window segmentation; segment i covers [i*stride, i*stride + window).
inline std::vector<SignalSegment> segment_stream(const Recording& rec,
                                                 std::size_t window,
                                                 std::size_t stride) {
  if (window == 0 || stride == 0) throw ConfigError("segment_stream: window and stride must be positive");
  if (rec.vibration.size() != rec.current_a.size() ||
      rec.vibration.size() != rec.current_b.size())
    throw DataError("segment_stream: channel lengths differ");
  if (window > rec.vibration.size())
    throw ConfigError("segment_stream: window exceeds recording length");

  const std::size_t count = (rec.vibration.size() - window) / stride + 1;
  std::vector<SignalSegment> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SignalSegment seg;
    seg.label = rec.label;
    seg.condition = rec.condition;
    seg.sample_rate_hz = rec.sample_rate_hz;
    const std::size_t off = i * stride;
    seg.vibration.assign(rec.vibration.begin() + off, rec.vibration.begin() + off + window);
    seg.current_a.assign(rec.current_a.begin() + off, rec.current_a.begin() + off + window);
    seg.current_b.assign(rec.current_b.begin() + off, rec.current_b.begin() + off + window);
    out.push_back(std::move(seg));
  }
  return out;
}

struct ChannelStats {
  double mean = 0.0;
  double stddev = 1.0;
};

struct StandardizeStats {
  ChannelStats vibration, current_a, current_b;
};

// Pooled per-channel mean/std over the given segment indices (training split).
inline StandardizeStats compute_standardize_stats(const std::vector<SignalSegment>& segments,
                                                  const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw DataError("standardize stats: empty index set");
  auto channel = [&](auto accessor) {
    double sum = 0.0, sumsq = 0.0;
    std::size_t n = 0;
    for (std::size_t idx : indices) {
      for (float v : accessor(segments.at(idx))) {
        sum += v;
        sumsq += static_cast<double>(v) * v;
        ++n;
      }
    }
    ChannelStats cs;
    cs.mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sumsq / static_cast<double>(n) - cs.mean * cs.mean);
    cs.stddev = std::sqrt(var);
    return cs;
  };
  StandardizeStats st;
  st.vibration = channel([](const SignalSegment& s) -> const std::vector<float>& { return s.vibration; });
  st.current_a = channel([](const SignalSegment& s) -> const std::vector<float>& { return s.current_a; });
  st.current_b = channel([](const SignalSegment& s) -> const std::vector<float>& { return s.current_b; });
  return st;
}

inline SignalSegment standardize(const SignalSegment& seg, const StandardizeStats& stats) {
  auto apply = [](const std::vector<float>& in, const ChannelStats& cs,
                  const char* name) {
    if (cs.stddev <= 0.0)
      throw DataError(std::string("standardize: channel '") + name + "' is constant (zero std)");
    std::vector<float> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i)
      out[i] = static_cast<float>((in[i] - cs.mean) / cs.stddev);
    return out;
  };
  SignalSegment out = seg;
  out.vibration = apply(seg.vibration, stats.vibration, "vibration");
  out.current_a = apply(seg.current_a, stats.current_a, "current_a");
  out.current_b = apply(seg.current_b, stats.current_b, "current_b");
  return out;
}

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

namespace detail {

// Largest-remainder apportionment of n items over the given ratios.
inline std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& ratios) {
  std::vector<std::size_t> counts(ratios.size());
  std::vector<std::pair<double, std::size_t>> fracs;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double ideal = static_cast<double>(n) * ratios[i];
    counts[i] = static_cast<std::size_t>(std::floor(ideal + 1e-12));
    assigned += counts[i];
    fracs.emplace_back(ideal - static_cast<double>(counts[i]), i);
  }
  std::stable_sort(fracs.begin(), fracs.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) counts[fracs[r % fracs.size()].second]++;
  return counts;
}

}  // namespace detail

// Stratified train/validation/test split; deterministic per seed. The
// validation ratio may be zero (two-way splits).
inline DatasetSplit make_split(const std::vector<FaultLabel>& labels,
                               std::array<double, 3> ratios, std::uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("make_split: ratios must sum to 1");
  if (ratios[0] <= 0.0 || ratios[2] <= 0.0 || ratios[1] < 0.0)
    throw ConfigError("make_split: train and test ratios must be positive");

  std::vector<double> active_ratios;
  std::vector<int> active_part;  // 0=train 1=val 2=test
  for (int p = 0; p < 3; ++p) {
    if (ratios[static_cast<std::size_t>(p)] > 0.0) {
      active_ratios.push_back(ratios[static_cast<std::size_t>(p)]);
      active_part.push_back(p);
    }
  }

  DatasetSplit split;
  split.seed = seed;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (static_cast<int>(labels[i]) == c) idx.push_back(i);
    if (idx.empty()) continue;
    if (idx.size() < active_ratios.size())
      throw DataError(std::string("make_split: class ") +
                      label_name(static_cast<FaultLabel>(c)) +
                      " has fewer segments than split parts");
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    rng.shuffle(idx);
    const auto counts = detail::apportion(idx.size(), active_ratios);
    std::size_t pos = 0;
    for (std::size_t p = 0; p < counts.size(); ++p) {
      auto* dest = active_part[p] == 0   ? &split.train
                   : active_part[p] == 1 ? &split.validation
                                         : &split.test;
      dest->insert(dest->end(), idx.begin() + pos, idx.begin() + pos + counts[p]);
      pos += counts[p];
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// k disjoint stratified folds over the given indices; per-class fold counts
// differ by at most one.
inline std::vector<std::vector<std::size_t>> make_folds(const std::vector<std::size_t>& indices,
                                                        const std::vector<FaultLabel>& labels,
                                                        std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("make_folds: k must be at least 2");
  std::vector<std::vector<std::size_t>> folds(k);
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i : indices)
      if (static_cast<int>(labels.at(i)) == c) idx.push_back(i);
    if (idx.empty()) continue;
    if (idx.size() < k)
      throw DataError(std::string("make_folds: class ") +
                      label_name(static_cast<FaultLabel>(c)) + " has fewer than k segments");
    Rng rng(derive_seed(seed, 0x466f6c64ULL + static_cast<std::uint64_t>(c)));
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) folds[i % k].push_back(idx[i]);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

// Parameters of the synthetic signal model: a jittered impulse train at the
// characteristic defect frequency, convolved with an exponentially decaying
// carrier-frequency burst, plus mains-coupled motor current channels.
struct SynthesisSpec {
  FaultLabel fault_class = FaultLabel::Healthy;
  geometry::BearingGeometry geom;
  geometry::OperatingCondition condition;
  double sample_rate_hz = 64000.0;
  double carrier_hz = 4000.0;     // excited resonance
  double impact_decay_s = 0.002;  // burst time constant
  double snr_db = 10.0;
  double jitter_pct = 2.0;        // timing jitter, percent of one period
  double mains_hz = 50.0;
  std::uint64_t seed = 0;

  void validate() const {
    geom.validate();
    condition.validate();
    if (sample_rate_hz <= 0.0) throw ConfigError("synthesis: sample rate must be positive");
    if (carrier_hz <= 0.0 || carrier_hz >= sample_rate_hz / 2.0)
      throw ConfigError("synthesis: carrier must lie below Nyquist");
    if (impact_decay_s <= 0.0) throw ConfigError("synthesis: impact decay must be positive");
    if (jitter_pct < 0.0 || jitter_pct >= 10.0)
      throw ConfigError("synthesis: jitter_pct must lie in [0, 10)");
  }
};

namespace detail {

inline double rms(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace detail

// Deterministic per (spec.seed, segment index). Fault classes carry an
// impact train at BPFO/BPFI; the current channels carry a mains tone with
// fault-dependent sidebands at offsets proportional to shaft frequency.
inline std::vector<SignalSegment> synthesize(const SynthesisSpec& spec,
                                             std::size_t n_segments,
                                             std::size_t window) {
  spec.validate();
  if (window < 2) throw ConfigError("synthesize: window must be at least 2");
  const double fs = spec.sample_rate_hz;
  const double dt = 1.0 / fs;
  const double fr = geometry::shaft_frequency(spec.condition);
  const double duration = static_cast<double>(window) * dt;

  std::vector<SignalSegment> out;
  out.reserve(n_segments);
  for (std::size_t si = 0; si < n_segments; ++si) {
    Rng rng(derive_seed(spec.seed, si));
    std::vector<double> vib(window, 0.0);

    double signature_rms = 0.0;
    if (spec.fault_class == FaultLabel::Healthy) {
      const double phase = rng.uniform(0.0, 2.0 * M_PI);
      const double phase2 = rng.uniform(0.0, 2.0 * M_PI);
      for (std::size_t j = 0; j < window; ++j) {
        const double t = static_cast<double>(j) * dt;
        vib[j] = std::sin(2.0 * M_PI * fr * t + phase) +
                 0.3 * std::sin(4.0 * M_PI * fr * t + phase2);
      }
      signature_rms = detail::rms(vib);
    } else {
      const double f_rep = spec.fault_class == FaultLabel::OuterFault
                               ? geometry::bpfo(spec.geom, fr)
                               : geometry::bpfi(spec.geom, fr);
      const double period = 1.0 / f_rep;
      const double tau = spec.impact_decay_s;
      const double burst_len = 8.0 * tau;
      const double phase0 = rng.uniform();  // fractional period offset
      const long k_first = static_cast<long>(std::floor(-burst_len / period)) - 1;
      const long k_last = static_cast<long>(std::ceil(duration / period)) + 1;
      for (long k = k_first; k <= k_last; ++k) {
        const double jitter = rng.normal() * spec.jitter_pct / 100.0;
        const double t_k = (static_cast<double>(k) + phase0 + jitter) * period;
        double amp = 1.0;
        if (spec.fault_class == FaultLabel::InnerFault)
          amp = 1.0 + 0.4 * std::sin(2.0 * M_PI * fr * t_k);  // load-zone modulation
        const std::size_t j_begin =
            static_cast<std::size_t>(std::max(0.0, std::ceil(t_k * fs)));
        const double end_f =
            std::min(static_cast<double>(window), std::ceil((t_k + burst_len) * fs));
        const std::size_t j_end = end_f > 0.0 ? static_cast<std::size_t>(end_f) : 0;
        for (std::size_t j = j_begin; j < j_end; ++j) {
          const double td = static_cast<double>(j) * dt - t_k;
          if (td < 0.0) continue;
          vib[j] += amp * std::exp(-td / tau) * std::sin(2.0 * M_PI * spec.carrier_hz * td);
        }
      }
      signature_rms = detail::rms(vib);
      const double shaft_phase = rng.uniform(0.0, 2.0 * M_PI);
      for (std::size_t j = 0; j < window; ++j) {
        const double t = static_cast<double>(j) * dt;
        vib[j] += 0.3 * signature_rms * std::sin(2.0 * M_PI * fr * t + shaft_phase);
      }
    }

    const double noise_sigma =
        signature_rms * std::pow(10.0, -spec.snr_db / 20.0);
    for (std::size_t j = 0; j < window; ++j) vib[j] += noise_sigma * rng.normal();

    // two-phase motor current: mains tone plus fault sidebands whose offset
    // scales with shaft frequency, so the signature moves under speed shifts
    std::vector<double> ia(window), ib(window);
    const double mains_phase = rng.uniform(0.0, 2.0 * M_PI);
    double sideband_offset = 0.0;
    if (spec.fault_class == FaultLabel::InnerFault) sideband_offset = 0.4 * fr;
    if (spec.fault_class == FaultLabel::OuterFault) sideband_offset = 0.8 * fr;
    const double sb_phase1 = rng.uniform(0.0, 2.0 * M_PI);
    const double sb_phase2 = rng.uniform(0.0, 2.0 * M_PI);
    for (std::size_t j = 0; j < window; ++j) {
      const double t = static_cast<double>(j) * dt;
      double base = std::sin(2.0 * M_PI * spec.mains_hz * t + mains_phase);
      double quad = std::sin(2.0 * M_PI * spec.mains_hz * t + mains_phase - M_PI / 2.0);
      if (sideband_offset > 0.0) {
        base += 0.3 * std::sin(2.0 * M_PI * (spec.mains_hz - sideband_offset) * t + sb_phase1) +
                0.3 * std::sin(2.0 * M_PI * (spec.mains_hz + sideband_offset) * t + sb_phase2);
        quad += 0.3 * std::sin(2.0 * M_PI * (spec.mains_hz - sideband_offset) * t + sb_phase1 - M_PI / 2.0) +
                0.3 * std::sin(2.0 * M_PI * (spec.mains_hz + sideband_offset) * t + sb_phase2 - M_PI / 2.0);
      }
      ia[j] = base;
      ib[j] = quad;
    }
    for (std::size_t j = 0; j < window; ++j) ia[j] += 0.1 * rng.normal();
    for (std::size_t j = 0; j < window; ++j) ib[j] += 0.1 * rng.normal();

    SignalSegment seg;
    seg.label = spec.fault_class;
    seg.condition = spec.condition;
    seg.sample_rate_hz = fs;
    seg.vibration.resize(window);
    seg.current_a.resize(window);
    seg.current_b.resize(window);
    for (std::size_t j = 0; j < window; ++j) {
      seg.vibration[j] = static_cast<float>(vib[j]);
      seg.current_a[j] = static_cast<float>(ia[j]);
      seg.current_b[j] = static_cast<float>(ib[j]);
    }
    out.push_back(std::move(seg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segment file format (little-endian):
//   magic "BSEG" | version u16 | window_len u32 | sample_rate f64
//   | condition label: u16 length + UTF-8 bytes
//   | records: label u8, vibration f32*W, current_a f32*W, current_b f32*W
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kSegmentFileVersion = 1;

struct SegmentFile {
  std::uint16_t version = kSegmentFileVersion;
  std::uint32_t window_len = 0;
  double sample_rate_hz = 0.0;
  std::string condition_label;
  std::vector<SignalSegment> segments;
};

namespace detail {

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return static_cast<bool>(in);
}

}  // namespace detail

inline void write_segments(const std::vector<SignalSegment>& segments, const std::string& path) {
  if (segments.empty()) throw DataError("write_segments: nothing to write");
  const std::size_t w = segments.front().window_len();
  const double rate = segments.front().sample_rate_hz;
  const std::string& cond = segments.front().condition.label;
  for (const auto& s : segments) {
    s.validate();
    if (s.window_len() != w || s.sample_rate_hz != rate || s.condition.label != cond)
      throw DataError("write_segments: segments must share window length, rate and condition");
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open segment file for writing: " + path);
  out.write("BSEG", 4);
  detail::write_pod(out, kSegmentFileVersion);
  detail::write_pod(out, static_cast<std::uint32_t>(w));
  detail::write_pod(out, rate);
  detail::write_pod(out, static_cast<std::uint16_t>(cond.size()));
  out.write(cond.data(), static_cast<std::streamsize>(cond.size()));
  for (const auto& s : segments) {
    detail::write_pod(out, static_cast<std::uint8_t>(s.label));
    out.write(reinterpret_cast<const char*>(s.vibration.data()),
              static_cast<std::streamsize>(w * sizeof(float)));
    out.write(reinterpret_cast<const char*>(s.current_a.data()),
              static_cast<std::streamsize>(w * sizeof(float)));
    out.write(reinterpret_cast<const char*>(s.current_b.data()),
              static_cast<std::streamsize>(w * sizeof(float)));
  }
  if (!out) throw DataError("write_segments: write failed for " + path);
}

inline SegmentFile read_segment_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open segment file: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "BSEG", 4) != 0)
    throw ParseError("not a segment file (bad magic): " + path);

  SegmentFile file;
  if (!detail::read_pod(in, file.version) || file.version != kSegmentFileVersion)
    throw ParseError("unsupported segment file version in " + path);
  if (!detail::read_pod(in, file.window_len) || file.window_len == 0)
    throw ParseError("bad window length in " + path);
  if (!detail::read_pod(in, file.sample_rate_hz) || file.sample_rate_hz <= 0.0)
    throw ParseError("bad sample rate in " + path);
  std::uint16_t label_len = 0;
  if (!detail::read_pod(in, label_len)) throw ParseError("truncated header in " + path);
  file.condition_label.resize(label_len);
  in.read(file.condition_label.data(), label_len);
  if (!in) throw ParseError("truncated header in " + path);

  const std::size_t w = file.window_len;
  std::size_t record = 0;
  while (true) {
    std::uint8_t label_byte = 0;
    in.read(reinterpret_cast<char*>(&label_byte), 1);
    if (in.eof() && in.gcount() == 0) break;  // clean end between records
    if (!in) throw ParseError("truncated record " + std::to_string(record) + " in " + path);
    if (label_byte > 2)
      throw ParseError("unknown label byte in record " + std::to_string(record) + " of " + path);

    SignalSegment seg;
    seg.label = static_cast<FaultLabel>(label_byte);
    seg.sample_rate_hz = file.sample_rate_hz;
    seg.condition.label = file.condition_label;
    seg.vibration.resize(w);
    seg.current_a.resize(w);
    seg.current_b.resize(w);
    in.read(reinterpret_cast<char*>(seg.vibration.data()),
            static_cast<std::streamsize>(w * sizeof(float)));
    in.read(reinterpret_cast<char*>(seg.current_a.data()),
            static_cast<std::streamsize>(w * sizeof(float)));
    in.read(reinterpret_cast<char*>(seg.current_b.data()),
            static_cast<std::streamsize>(w * sizeof(float)));
    if (!in) throw ParseError("truncated record " + std::to_string(record) + " in " + path);
    file.segments.push_back(std::move(seg));
    ++record;
  }
  return file;
}

inline std::vector<SignalSegment> read_segments(const std::string& path) {
  return read_segment_file(path).segments;
}

// CSV interoperability import: header "vib,ia,ib", one row per sample.
inline Recording read_recording_csv(const std::string& path, double sample_rate_hz,
                                    FaultLabel label,
                                    const geometry::OperatingCondition& condition) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV recording: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV file: " + path);
  auto strip = [](std::string s) {
    s.erase(std::remove_if(s.begin(), s.end(),
                           [](unsigned char c) { return std::isspace(c); }),
            s.end());
    return s;
  };
  if (strip(line) != "vib,ia,ib")
    throw ParseError("CSV header must be 'vib,ia,ib' in " + path);

  Recording rec;
  rec.sample_rate_hz = sample_rate_hz;
  rec.label = label;
  rec.condition = condition;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (strip(line).empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::array<double, 3> vals{};
    for (int c = 0; c < 3; ++c) {
      if (!std::getline(row, cell, ','))
        throw ParseError("CSV row " + std::to_string(lineno) + " has fewer than 3 columns");
      try {
        vals[static_cast<std::size_t>(c)] = std::stod(cell);
      } catch (const std::exception&) {
        throw ParseError("CSV row " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    rec.vibration.push_back(vals[0]);
    rec.current_a.push_back(vals[1]);
    rec.current_b.push_back(vals[2]);
  }
  return rec;
}

inline std::vector<FaultLabel> labels_of(const std::vector<SignalSegment>& segments) {
  std::vector<FaultLabel> out;
  out.reserve(segments.size());
  for (const auto& s : segments) out.push_back(s.label);
  return out;
}

}  // namespace bfkit::dataio
