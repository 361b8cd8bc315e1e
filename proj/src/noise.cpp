#include "aasde/noise.hpp"

#include <cmath>
#include <string>

#include "aasde/error.hpp"

namespace aasde {

TimeGrid::TimeGrid(std::int64_t first_index, std::size_t n_steps, double step)
    : first_index_(first_index), n_steps_(n_steps), step_(step) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw InvalidArgument("time grid step must be finite and > 0");
  }
}

TimeGrid TimeGrid::covering(double t_min, double t_max, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw InvalidArgument("time grid step must be finite and > 0");
  }
  if (!(t_min <= t_max) || !std::isfinite(t_min) || !std::isfinite(t_max)) {
    throw InvalidArgument("time grid needs finite t_min <= t_max");
  }
  const auto first = static_cast<std::int64_t>(std::floor(t_min / step + 1e-9));
  const auto last = static_cast<std::int64_t>(std::ceil(t_max / step - 1e-9));
  return TimeGrid(first, static_cast<std::size_t>(std::max<std::int64_t>(last - first, 0)), step);
}

std::size_t TimeGrid::zero_node() const {
  if (!contains_zero()) throw InvalidArgument("time grid does not contain t = 0");
  return static_cast<std::size_t>(-first_index_);
}

std::size_t TimeGrid::nearest_node(double t) const noexcept {
  const double rel = std::round(t / step_) - static_cast<double>(first_index_);
  if (rel <= 0.0) return 0;
  if (rel >= static_cast<double>(n_steps_)) return n_steps_;
  return static_cast<std::size_t>(rel);
}

std::size_t TimeGrid::steps_for(double span) const {
  if (!(span >= 0.0)) throw InvalidArgument("span must be >= 0");
  return static_cast<std::size_t>(std::ceil(span / step_ - 1e-9));
}

TimeGrid TimeGrid::extended_back(double span) const {
  const std::size_t extra = steps_for(span);
  return TimeGrid(first_index_ - static_cast<std::int64_t>(extra), n_steps_ + extra, step_);
}

void WienerSource::increments(const TimeGrid& grid, std::span<double> out) const {
  if (out.size() != grid.n_steps()) throw DimensionMismatch(grid.n_steps(), out.size());
  const double scale = std::sqrt(grid.step());
  std::int64_t k = grid.first_index();
  std::size_t i = 0;
  // odd leading index: take the second half of its block
  if (i < out.size() && (k & 1)) {
    out[i++] = scale * rng_.normal(k++);
  }
  for (; i + 1 < out.size(); i += 2, k += 2) {
    const auto pair = rng_.normal_pair(k / 2);  // k is even here
    out[i] = scale * pair[0];
    out[i + 1] = scale * pair[1];
  }
  if (i < out.size()) out[i] = scale * rng_.normal(k);
}

std::vector<double> WienerSource::increments(const TimeGrid& grid) const {
  std::vector<double> out(grid.n_steps());
  increments(grid, out);
  return out;
}

WienerPath sample_wiener(const TimeGrid& grid, std::uint64_t seed, std::uint64_t path_index) {
  const std::size_t zero = grid.zero_node();
  const auto dw = WienerSource(seed, path_index).increments(grid);
  WienerPath path{grid, std::vector<double>(grid.n_nodes(), 0.0), seed, path_index};
  for (std::size_t i = zero; i < grid.n_steps(); ++i) path.values[i + 1] = path.values[i] + dw[i];
  for (std::size_t i = zero; i > 0; --i) path.values[i - 1] = path.values[i] - dw[i - 1];
  return path;
}

double ito_integral(std::span<const double> h, const WienerPath& path, std::size_t from,
                    std::size_t to) {
  if (from > to) throw InvalidArgument("ito_integral: from > to");
  if (to > path.grid.n_steps()) {
    throw InvalidArgument("ito_integral: node " + std::to_string(to) + " outside the path grid");
  }
  if (h.size() < to) throw InvalidArgument("ito_integral: integrand shorter than the range");
  double acc = 0.0;
  for (std::size_t i = from; i < to; ++i) acc += h[i] * (path.values[i + 1] - path.values[i]);
  return acc;
}

}  // namespace aasde
