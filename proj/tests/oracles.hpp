#pragma once

// Reference implementations used only by the tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "echograd/room_sim.hpp"

namespace oracle {

using echograd::Spike;
using echograd::Vec3;

// Images by unfolding: the image in cell k of an axis is reached by crossing
// the planes x = jL strictly between cell 0 and cell k. Even j are copies of
// the low wall, odd j of the high wall.
inline std::vector<Spike> unfolded_images(const echograd::RoomScene& scene, double max_distance) {
  const Vec3& L = scene.dimensions;
  const Vec3& s = scene.source_position;
  const auto& a = scene.wall_absorptions;
  int kmax[3];
  for (int i = 0; i < 3; ++i) kmax[i] = static_cast<int>(std::ceil((max_distance + 1.0) / L[i])) + 1;
  std::vector<Spike> out;
  int k[3];
  for (k[0] = -kmax[0]; k[0] <= kmax[0]; ++k[0]) {
    for (k[1] = -kmax[1]; k[1] <= kmax[1]; ++k[1]) {
      for (k[2] = -kmax[2]; k[2] <= kmax[2]; ++k[2]) {
        Vec3 pos;
        double amp = 1.0;
        for (int i = 0; i < 3; ++i) {
          const bool odd = (k[i] % 2) != 0;
          pos[i] = odd ? (k[i] + 1) * L[i] - s[i] : k[i] * L[i] + s[i];
          const int lo = k[i] > 0 ? 1 : k[i] + 1;
          const int hi = k[i] > 0 ? k[i] : 0;
          for (int j = lo; j <= hi; ++j) {
            const bool low_wall = (j % 2) == 0;
            amp *= std::sqrt(1.0 - a[2 * i + (low_wall ? 0 : 1)]);
          }
        }
        bool audible = true;
        for (const auto& m : scene.array.positions()) audible = audible && (pos - m).norm() <= max_distance;
        if (audible) out.push_back({amp, pos});
      }
    }
  }
  return out;
}

inline void sort_spikes(std::vector<Spike>& v) {
  std::sort(v.begin(), v.end(), [](const Spike& a, const Spike& b) {
    if (a.position.x() != b.position.x()) return a.position.x() < b.position.x();
    if (a.position.y() != b.position.y()) return a.position.y() < b.position.y();
    return a.position.z() < b.position.z();
  });
}

struct Comparison {
  bool same_count = false;
  double position_error = 0.0;
  double amplitude_error = 0.0;
};

inline Comparison compare(std::vector<Spike> a, std::vector<Spike> b) {
  Comparison c;
  c.same_count = a.size() == b.size();
  if (!c.same_count) return c;
  sort_spikes(a);
  sort_spikes(b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    c.position_error = std::max(c.position_error, (a[i].position - b[i].position).cwiseAbs().maxCoeff());
    c.amplitude_error = std::max(c.amplitude_error, std::abs(a[i].amplitude - b[i].amplitude));
  }
  return c;
}

}  // namespace oracle
