#pragma once

// JSON forms of parameters and traces, and the trace checksum.

#include <cstdint>
#include <cstring>
#include <string>

#include <nlohmann/json.hpp>

#include "flickerband/geometry.hpp"

namespace flickerband {

inline nlohmann::ordered_json to_json(const BandingParams& p) {
  return {{"theta", p.theta},
          {"width_w", p.width_w},
          {"gap_g", p.gap_g},
          {"phase_phi", p.phase_phi},
          {"sigma_theta", p.sigma_theta},
          {"delta_g", p.delta_g},
          {"delta_w", p.delta_w},
          {"delta_edge", p.delta_edge},
          {"edge_corr_len", p.edge_corr_len},
          {"feather_px", p.feather_px},
          {"v_y", p.v_y},
          {"noise_alpha", p.noise_alpha},
          {"noise_sigma_r", p.noise_sigma_r},
          {"seed", p.seed}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline BandingParams params_from_json(const nlohmann::json& j) {
  BandingParams p;
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") {
      p.seed = value.get<std::uint64_t>();
      continue;
    }
    double* field = nullptr;
    if (key == "theta") field = &p.theta;
    else if (key == "width_w") field = &p.width_w;
    else if (key == "gap_g") field = &p.gap_g;
    else if (key == "phase_phi") field = &p.phase_phi;
    else if (key == "sigma_theta") field = &p.sigma_theta;
    else if (key == "delta_g") field = &p.delta_g;
    else if (key == "delta_w") field = &p.delta_w;
    else if (key == "delta_edge") field = &p.delta_edge;
    else if (key == "edge_corr_len") field = &p.edge_corr_len;
    else if (key == "feather_px") field = &p.feather_px;
    else if (key == "v_y") field = &p.v_y;
    else if (key == "noise_alpha") field = &p.noise_alpha;
    else if (key == "noise_sigma_r") field = &p.noise_sigma_r;
    else throw InvalidParams("unknown parameter key: " + key);
    *field = value.get<double>();
  }
  validate(p);
  return p;
}

/// FNV-1a over the exact bit patterns of every trace value.
inline std::string trace_digest(const JitterTrace& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t bits) {
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  auto feed_double = [&feed](double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    feed(bits);
  };
  feed(t.size());
  feed_double(t.u_origin);
  for (std::size_t i = 0; i < t.size(); ++i) {
    feed(static_cast<std::uint64_t>(t.stripe_indices[i]));
    feed_double(t.angle_offsets[i]);
    feed_double(t.spacing_offsets[i]);
    feed_double(t.width_offsets[i]);
    for (double e : t.eta_top[i]) feed_double(e);
    for (double e : t.eta_bot[i]) feed_double(e);
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[i] = kHex[h & 0xf];
  return out;
}

}  // namespace flickerband
