#include "synth.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <fstream>
#include <iterator>

#include "lprobe/rng.hpp"

namespace lprobe::testing {

namespace fs = std::filesystem;

namespace {

const char* kPhones[] = {"AA", "AE", "B", "D", "IY", "K", "S", "T", "UW", "M", "N", "P",
                         "R", "L", "EH", "OW", "F", "G", "V", "Z"};

std::vector<double> gaussian(SplitMix64& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

}  // namespace

std::vector<double> synth_vowel(double f0, const std::vector<double>& formants,
                                const std::vector<double>& bandwidths, double sample_rate, double seconds) {
  const auto n = static_cast<std::size_t>(seconds * sample_rate);
  std::vector<double> x(n, 0.0);
  const double period = sample_rate / f0;
  for (double t = 0.0; t < static_cast<double>(n); t += period) x[static_cast<std::size_t>(t)] = 1.0;
  for (std::size_t f = 0; f < formants.size(); ++f) {
    const double r = std::exp(-M_PI * bandwidths[f] / sample_rate);
    const double c = 2.0 * r * std::cos(2.0 * M_PI * formants[f] / sample_rate);
    double y1 = 0.0, y2 = 0.0;
    for (double& v : x) {
      const double y = v + c * y1 - r * r * y2;
      y2 = y1;
      y1 = y;
      v = y;
    }
  }
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  for (double& v : x) v *= 0.5 / peak;
  return x;
}

std::vector<double> lpc_formants(std::span<const double> x, double sample_rate, int order, double max_bandwidth) {
  const std::size_t n = x.size();
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pre = x[i] - (i ? 0.97 * x[i - 1] : 0.0);
    w[i] = pre * (0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n - 1)));
  }
  std::vector<double> r(static_cast<std::size_t>(order) + 1, 0.0);
  for (int k = 0; k <= order; ++k) {
    for (std::size_t i = static_cast<std::size_t>(k); i < n; ++i) r[static_cast<std::size_t>(k)] += w[i] * w[i - static_cast<std::size_t>(k)];
  }
  // Levinson-Durbin.
  std::vector<double> a(static_cast<std::size_t>(order) + 1, 0.0), prev;
  a[0] = 1.0;
  double err = r[0];
  for (int i = 1; i <= order; ++i) {
    double acc = r[static_cast<std::size_t>(i)];
    for (int j = 1; j < i; ++j) acc += a[static_cast<std::size_t>(j)] * r[static_cast<std::size_t>(i - j)];
    const double k = -acc / err;
    prev = a;
    for (int j = 1; j < i; ++j) a[static_cast<std::size_t>(j)] = prev[static_cast<std::size_t>(j)] + k * prev[static_cast<std::size_t>(i - j)];
    a[static_cast<std::size_t>(i)] = k;
    err *= 1.0 - k * k;
  }
  // Roots of z^p + a1 z^(p-1) + ... + ap via the companion matrix.
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(order, order);
  for (int j = 0; j < order; ++j) comp(0, j) = -a[static_cast<std::size_t>(j + 1)];
  for (int i = 1; i < order; ++i) comp(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp);
  std::vector<double> out;
  for (int i = 0; i < order; ++i) {
    const std::complex<double> z = es.eigenvalues()(i);
    if (z.imag() <= 0.0) continue;
    const double f = std::arg(z) * sample_rate / (2.0 * M_PI);
    const double bw = -std::log(std::abs(z)) * sample_rate / M_PI;
    if (f > 90.0 && bw < max_bandwidth) out.push_back(f);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double autocorr_f0(std::span<const double> x, double sample_rate) {
  const auto min_lag = static_cast<std::size_t>(sample_rate / 400.0);
  const auto max_lag = static_cast<std::size_t>(sample_rate / 60.0) + 1;
  const std::size_t n = x.size() - max_lag - 1;
  std::vector<double> r(max_lag + 2, 0.0);
  for (std::size_t lag = min_lag - 1; lag <= max_lag + 1; ++lag) {
    double num = 0.0, e0 = 0.0, e1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += x[i] * x[i + lag];
      e0 += x[i] * x[i];
      e1 += x[i + lag] * x[i + lag];
    }
    r[lag] = num / std::sqrt(e0 * e1 + 1e-300);
  }
  std::size_t best = min_lag;
  for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
    if (r[lag] > r[best]) best = lag;
  }
  const double a = r[best - 1], b = r[best], c = r[best + 1];
  const double denom = a - 2 * b + c;
  const double shift = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
  return sample_rate / (static_cast<double>(best) + shift);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "lprobe_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  const std::string sa((std::istreambuf_iterator<char>(fa)), {});
  const std::string sb((std::istreambuf_iterator<char>(fb)), {});
  return sa == sb;
}

namespace {

ProsodyUtterance planted_utterance(std::uint64_t seed, double hop_s, bool boundary) {
  SplitMix64 rng(seed);
  ProsodyUtterance u;
  const auto n_words = 8 + static_cast<std::uint32_t>(rng.below(7));
  u.planted_word = boundary ? 1 + static_cast<std::uint32_t>(rng.below(n_words - 2))
                            : static_cast<std::uint32_t>(rng.below(n_words));
  const auto frames_of = [hop_s](double s) { return static_cast<int>(std::lround(s / hop_s)); };
  const int lead = frames_of(0.1);
  const double total_guess = 0.1 + 0.4 * n_words + 0.45;
  auto push = [&](double f0, double energy) {
    u.track.f0_hz.push_back(static_cast<float>(f0));
    u.track.energy.push_back(static_cast<float>(energy));
  };
  auto silence = [&](int frames) {
    for (int i = 0; i < frames; ++i) push(0.0, 0.005 * std::exp(0.1 * rng.normal()));
  };
  silence(lead);
  for (std::uint32_t w = 0; w < n_words; ++w) {
    const int len = frames_of(rng.uniform(0.2, 0.4));
    const auto start = u.track.f0_hz.size();
    const bool planted = w == u.planted_word;
    for (int i = 0; i < len; ++i) {
      const double pos = (i + 0.5) / len;
      const double t = static_cast<double>(u.track.f0_hz.size()) * hop_s;
      double f0 = 120.0 * (1.0 + 0.02 * rng.normal());
      if (!boundary) f0 *= std::exp(-0.1 * t / total_guess);
      double energy = (0.5 + 0.5 * std::sin(M_PI * pos)) * std::exp(0.1 * rng.normal());
      if (planted && !boundary) {
        f0 *= 1.0 + 0.3 * std::sin(M_PI * pos);
        energy *= 3.0;
      }
      if (planted && boundary && pos > 0.6) f0 *= 1.0 - 0.15 * (pos - 0.6) / 0.4;
      push(f0, energy);
    }
    u.words.segments.push_back({"w" + std::to_string(w), static_cast<double>(start) * hop_s,
                                static_cast<double>(u.track.f0_hz.size()) * hop_s});
    if (planted && boundary) silence(frames_of(0.35));
  }
  silence(lead);
  return u;
}

}  // namespace

ProsodyUtterance planted_prominence_utterance(std::uint64_t seed, double hop_s) {
  return planted_utterance(seed, hop_s, false);
}

ProsodyUtterance planted_boundary_utterance(std::uint64_t seed, double hop_s) {
  return planted_utterance(seed, hop_s, true);
}

SynthTruth write_dataset(const fs::path& root, const SynthSpec& spec) {
  SplitMix64 rng(spec.seed);
  const std::size_t d = spec.dim;
  std::vector<std::vector<double>> phone_mean;
  for (std::uint32_t k = 0; k < spec.phone_classes; ++k) phone_mean.push_back(gaussian(rng, d, spec.phone_signal));
  const auto u1 = gaussian(rng, d, spec.prosody_signal / std::sqrt(static_cast<double>(d)) * 2.0);
  const auto u2 = gaussian(rng, d, spec.prosody_signal / std::sqrt(static_cast<double>(d)) * 2.0);

  SynthTruth truth;
  Manifest& m = truth.manifest;
  m.frame_hop_s = spec.hop_s;
  m.num_layers = spec.layers;
  m.dim = spec.dim;
  m.accents = spec.accents;
  m.model_tag = spec.model_tag;

  for (const auto& accent : spec.accents) {
    for (std::uint32_t s = 0; s < spec.speakers_per_accent; ++s) {
      const std::string speaker = accent + "_s" + std::to_string(s);
      const auto offset = gaussian(rng, d, 0.3);
      for (std::uint32_t u = 0; u < spec.utterances_per_speaker; ++u) {
        const std::string utt = speaker + "_u" + std::to_string(u);
        Alignment align;
        std::vector<int> frame_phone, frame_word;
        std::vector<WordProsody> words;
        auto silence = [&](int frames) {
          for (int i = 0; i < frames; ++i) {
            frame_phone.push_back(-1);
            frame_word.push_back(-1);
          }
        };
        silence(5);
        for (std::uint32_t w = 0; w < spec.words_per_utterance; ++w) {
          const auto word_start = static_cast<std::uint32_t>(frame_phone.size());
          const std::uint32_t nph = 2 + static_cast<std::uint32_t>(rng.below(3));
          for (std::uint32_t p = 0; p < nph; ++p) {
            const auto k = static_cast<int>(rng.below(spec.phone_classes));
            int len = 2 + static_cast<int>(rng.below(5));
            if (rng.uniform() < spec.short_phone_prob) {
              len = 1;
              ++truth.short_phones;
            }
            const auto start = static_cast<double>(frame_phone.size()) * spec.hop_s;
            for (int i = 0; i < len; ++i) {
              frame_phone.push_back(k);
              frame_word.push_back(static_cast<int>(w));
            }
            align.phone.segments.push_back({kPhones[k], start, static_cast<double>(frame_phone.size()) * spec.hop_s});
          }
          const std::string label = "w" + std::to_string(rng.below(20));
          align.word.segments.push_back({label, static_cast<double>(word_start) * spec.hop_s,
                                         static_cast<double>(frame_phone.size()) * spec.hop_s});
          words.push_back({utt, w, label, rng.normal(), rng.normal()});
        }
        silence(5);
        const auto frames = static_cast<std::uint32_t>(frame_phone.size());

        FeatureDump dump(DumpShape{spec.layers, frames, spec.dim});
        for (std::uint32_t l = 0; l < spec.layers; ++l) {
          for (std::uint32_t t = 0; t < frames; ++t) {
            auto f = dump.frame(l, t);
            for (std::size_t c = 0; c < d; ++c) {
              double v = spec.noise * rng.normal() + offset[c];
              if (static_cast<int>(l) == spec.phone_layer && frame_phone[t] >= 0) {
                v += phone_mean[static_cast<std::size_t>(frame_phone[t])][c];
              }
              if (static_cast<int>(l) == spec.prosody_layer && frame_word[t] >= 0) {
                const auto& wp = words[static_cast<std::size_t>(frame_word[t])];
                v += wp.prominence * u1[c] + wp.boundary * u2[c];
              }
              f[c] = static_cast<float>(v);
            }
          }
        }
        ProsodyTrack track;
        for (std::uint32_t t = 0; t < frames; ++t) {
          const int w = frame_word[t];
          const double prom = w >= 0 ? words[static_cast<std::size_t>(w)].prominence : 0.0;
          track.f0_hz.push_back(w >= 0 ? static_cast<float>(120.0 * std::exp(0.1 * prom) + rng.normal()) : 0.0f);
          track.energy.push_back(w >= 0 ? static_cast<float>(std::exp(0.5 * prom)) : 0.01f);
        }

        UtteranceMeta meta{utt, speaker, accent, frames, "feats/" + utt + ".lpd", "align/" + utt + ".tsv",
                           "tracks/" + utt + ".lpt"};
        write_features(dump, root / meta.feature_path);
        write_alignment(align, root / meta.alignment_path);
        write_track(track, root / *meta.track_path);
        m.utterances.push_back(meta);
        truth.labels.insert(truth.labels.end(), words.begin(), words.end());
      }
    }
  }
  write_manifest(m, root / "manifest.json");
  if (spec.write_labels) write_labels(truth.labels, root / "labels" / "word_prosody.tsv");
  return truth;
}

}  // namespace lprobe::testing
