// Displacement-error metrics over predicted vs. true 2D positions.
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "driftmon/common.hpp"

namespace driftmon {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

namespace detail {

inline void check_trajectories(std::span<const Point2> pred, std::span<const Point2> truth) {
    if (pred.empty() || truth.empty())
        throw std::invalid_argument("trajectory metrics: inputs must be non-empty");
    if (pred.size() != truth.size())
        throw std::invalid_argument("trajectory metrics: length mismatch");
}

inline double sq_dist(const Point2& a, const Point2& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

}  // namespace detail

/// Mean pointwise Euclidean error.
inline double compute_ade(std::span<const Point2> pred, std::span<const Point2> truth) {
    detail::check_trajectories(pred, truth);
    CompensatedSum acc;
    for (std::size_t i = 0; i < pred.size(); ++i) acc.add(std::sqrt(detail::sq_dist(pred[i], truth[i])));
    return acc.value() / static_cast<double>(pred.size());
}

/// Euclidean error at the final position.
inline double compute_fde(std::span<const Point2> pred, std::span<const Point2> truth) {
    detail::check_trajectories(pred, truth);
    return std::sqrt(detail::sq_dist(pred.back(), truth.back()));
}

/// Root of the mean squared Euclidean error; never below the ADE.
inline double compute_rmse(std::span<const Point2> pred, std::span<const Point2> truth) {
    detail::check_trajectories(pred, truth);
    CompensatedSum acc;
    for (std::size_t i = 0; i < pred.size(); ++i) acc.add(detail::sq_dist(pred[i], truth[i]));
    return std::sqrt(acc.value() / static_cast<double>(pred.size()));
}

}  // namespace driftmon
