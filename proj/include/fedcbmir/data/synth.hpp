#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "fedcbmir/data/image.hpp"
#include "fedcbmir/data/manifest.hpp"
#include "fedcbmir/errors.hpp"
#include "fedcbmir/random.hpp"

namespace fedcbmir {

// Two texture classes: sparse low-frequency blobs ("benign") and periodic
// stripes ("malignant"). Client k is tagged with one magnification and draws
// every texture at scale factor scales[k].
struct SynthConfig {
  std::size_t clients = 4;
  std::size_t train = 80;
  std::size_t validation = 20;
  std::size_t test = 20;
  std::size_t image_size = 32;
  double stripe_wavelength = 4.0;  // pixels at scale 1
  double blob_sigma = 2.5;         // pixels at scale 1
  std::size_t min_blobs = 2;
  std::size_t max_blobs = 4;
  double noise_sigma = 0.03;
  std::vector<double> scales{1.0, 1.25, 1.6, 2.0};
  std::vector<Magnification> magnifications{Magnification::x40, Magnification::x100,
                                            Magnification::x200, Magnification::x400};
  std::uint64_t seed = 0;

  void validate() const {
    if (clients == 0) throw ConfigError("synth: at least one client");
    if (image_size < 8) throw ConfigError("synth: image size must be at least 8");
    if (scales.empty() || magnifications.empty()) throw ConfigError("synth: empty scale list");
    if (!(stripe_wavelength >= 2.0)) throw ConfigError("synth: stripe wavelength below 2 pixels");
    if (min_blobs == 0 || max_blobs < min_blobs) throw ConfigError("synth: bad blob count range");
    for (double s : scales) {
      if (!(s > 0)) throw ConfigError("synth: scale factors must be positive");
    }
  }

  double scale_of(std::size_t client) const { return scales[client % scales.size()]; }
  Magnification magnification_of(std::size_t client) const {
    return magnifications[client % magnifications.size()];
  }
};

struct SynthOutput {
  std::vector<DatasetManifest> clients;  // one per client, paths relative to its directory
  DatasetManifest combined;              // every record, paths relative to the output root
};

namespace detail {

inline constexpr std::array<double, 3> kLight{0.92, 0.80, 0.88};
inline constexpr std::array<double, 3> kDark{0.40, 0.18, 0.48};

inline Tensor<float> paint(std::size_t n, Rng& rng, double noise,
                           const std::function<double(std::size_t, std::size_t)>& ink) {
  Tensor<float> t({3, n, n});
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double a = ink(y, x);
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = kLight[c] + (kDark[c] - kLight[c]) * a + noise * normal(rng);
        t.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return t;
}

}  // namespace detail

// One image of the given class for client `client`, drawn from `rng`.
inline Tensor<float> render_synth_image(const SynthConfig& cfg, std::size_t client, Label label,
                                        Rng& rng) {
  const std::size_t n = cfg.image_size;
  const double scale = cfg.scale_of(client);
  if (is_positive(label)) {
    const double lambda = cfg.stripe_wavelength * scale;
    const bool vertical = uniform01(rng) < 0.5;
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    return detail::paint(n, rng, cfg.noise_sigma, [&](std::size_t y, std::size_t x) {
      const double u = static_cast<double>(vertical ? x : y);
      return 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * u / lambda + phase);
    });
  }
  const std::size_t count = cfg.min_blobs + uniform_index(rng, cfg.max_blobs - cfg.min_blobs + 1);
  struct Blob {
    double y, x, s;
  };
  std::vector<Blob> blobs;
  for (std::size_t i = 0; i < count; ++i) {
    blobs.push_back({uniform(rng, 0.0, static_cast<double>(n)), uniform(rng, 0.0, static_cast<double>(n)),
                     cfg.blob_sigma * scale * uniform(rng, 0.8, 1.2)});
  }
  return detail::paint(n, rng, cfg.noise_sigma, [&](std::size_t y, std::size_t x) {
    double a = 0.0;
    for (const auto& b : blobs) {
      const double dy = static_cast<double>(y) - b.y, dx = static_cast<double>(x) - b.x;
      a = std::max(a, std::exp(-(dy * dy + dx * dx) / (2.0 * b.s * b.s)));
    }
    return 0.9 * a;
  });
}

inline std::string synth_id(std::size_t client, Split split, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "c%zu-%s-%04zu", client + 1, to_string(split), i);
  return buf;
}

// Writes client-<k>/<split>/<id>.png, client-<k>/manifest.csv and a combined
// manifest.csv at the root. Labels alternate within each split, so even split
// sizes are exactly class-balanced.
inline SynthOutput synth_generate(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  SynthOutput out;
  out.combined.base_dir = out_dir;
  for (std::size_t k = 0; k < cfg.clients; ++k) {
    const std::string dir = "client-" + std::to_string(k + 1);
    DatasetManifest m;
    m.base_dir = out_dir / dir;
    for (auto [split, count] : {std::pair{Split::train, cfg.train},
                                std::pair{Split::validation, cfg.validation},
                                std::pair{Split::test, cfg.test}}) {
      for (std::size_t i = 0; i < count; ++i) {
        const auto id = synth_id(k, split, i);
        const Label label = i % 2 == 0 ? Label::benign : Label::malignant;
        Rng rng(derive_seed(cfg.seed, "synth/" + id));
        const auto img = render_synth_image(cfg, k, label, rng);
        const std::string rel = std::string(to_string(split)) + "/" + id + ".png";
        write_file(m.base_dir / rel, encode_png(from_tensor(img)));
        ImageRecord r{id, rel, label, cfg.magnification_of(k), "center-" + std::to_string(k + 1), split};
        m.records.push_back(r);
        r.path = dir + "/" + rel;
        out.combined.records.push_back(std::move(r));
      }
    }
    m.stats = compute_stats(m.records);
    save_manifest(m.base_dir / "manifest.csv", m.records);
    out.clients.push_back(std::move(m));
  }
  out.combined.stats = compute_stats(out.combined.records);
  save_manifest(out_dir / "manifest.csv", out.combined.records);
  return out;
}

}  // namespace fedcbmir
