// Scalar emission distributions for the two-mode error process.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>

#include "driftmon/common.hpp"

namespace driftmon {

struct Gaussian {
    double mean = 0.0;
    double std = 1.0;
};

struct Laplace {
    double location = 0.0;
    double scale = 1.0;
};

/// Location-scale Student-t; dof > 2 so the variance exists.
struct StudentT {
    double location = 0.0;
    double scale = 1.0;
    double dof = 3.0;
};

using EmissionDist = std::variant<Gaussian, Laplace, StudentT>;

inline void validate(const EmissionDist& dist) {
    std::visit(
        [](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                if (!(d.std > 0.0) || !std::isfinite(d.mean) || !std::isfinite(d.std))
                    throw std::invalid_argument("Gaussian emission: std must be finite and > 0");
            } else if constexpr (std::is_same_v<T, Laplace>) {
                if (!(d.scale > 0.0) || !std::isfinite(d.location) || !std::isfinite(d.scale))
                    throw std::invalid_argument("Laplace emission: scale must be finite and > 0");
            } else {
                if (!(d.scale > 0.0) || !(d.dof > 2.0) || !std::isfinite(d.location) ||
                    !std::isfinite(d.scale) || !std::isfinite(d.dof))
                    throw std::invalid_argument("StudentT emission: need scale > 0 and dof > 2");
            }
        },
        dist);
}

inline double mean_of(const EmissionDist& dist) {
    return std::visit(
        [](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Gaussian>) return d.mean;
            else return d.location;
        },
        dist);
}

inline double variance_of(const EmissionDist& dist) {
    return std::visit(
        [](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Gaussian>) return d.std * d.std;
            else if constexpr (std::is_same_v<T, Laplace>) return 2.0 * d.scale * d.scale;
            else return d.scale * d.scale * d.dof / (d.dof - 2.0);
        },
        dist);
}

inline double sample(const EmissionDist& dist, Rng& rng) {
    return std::visit(
        [&rng](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                return d.mean + d.std * sample_standard_normal(rng);
            } else if constexpr (std::is_same_v<T, Laplace>) {
                return d.location + d.scale * sample_standard_laplace(rng);
            } else {
                return d.location + d.scale * sample_standard_student_t(rng, d.dof);
            }
        },
        dist);
}

/// Same emission family re-parameterized to the given mean and variance.
inline EmissionDist with_moments(const EmissionDist& dist, double mean, double variance) {
    if (!(variance > 0.0)) throw std::invalid_argument("with_moments: variance must be > 0");
    return std::visit(
        [&](const auto& d) -> EmissionDist {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                return Gaussian{mean, std::sqrt(variance)};
            } else if constexpr (std::is_same_v<T, Laplace>) {
                return Laplace{mean, std::sqrt(variance / 2.0)};
            } else {
                return StudentT{mean, std::sqrt(variance * (d.dof - 2.0) / d.dof), d.dof};
            }
        },
        dist);
}

inline std::string kind_of(const EmissionDist& dist) {
    return std::visit(
        [](const auto& d) -> std::string {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Gaussian>) return "gaussian";
            else if constexpr (std::is_same_v<T, Laplace>) return "laplace";
            else return "student_t";
        },
        dist);
}

}  // namespace driftmon
