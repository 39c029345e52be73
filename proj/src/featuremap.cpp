#include "emk/featuremap.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace emk {

double bessel_i(int order, double x) {
    if (order < 0)
        throw std::invalid_argument("bessel_i: order must be non-negative");
    const double half = 0.5 * x;
    // term_0 = (x/2)^order / order!
    double term = 1.0;
    for (int k = 1; k <= order; ++k)
        term *= half / static_cast<double>(k);
    double sum = term;
    const double half_sq = half * half;
    for (int k = 1; k < 1000; ++k) {
        term *= half_sq / (static_cast<double>(k) * static_cast<double>(k + order));
        sum += term;
        if (term == 0.0 || term < 1e-16 * sum)
            break;
    }
    return sum;
}

FeatureMapSpec build_feature_map_spec(double kappa, int s) {
    if (!(kappa > 0.0) || kappa > kMaxKappa)
        throw std::invalid_argument("build_feature_map_spec: kappa must be in (0, " +
                                    std::to_string(kMaxKappa) + "]");
    if (s < 1)
        throw std::invalid_argument("build_feature_map_spec: s must be >= 1");

    FeatureMapSpec spec;
    spec.kappa = kappa;
    spec.s = s;
    spec.u.resize(static_cast<std::size_t>(s) + 1);

    spec.u[0] = bessel_i(0, kappa);
    double z = spec.u[0];
    for (int i = 1; i <= s; ++i) {
        spec.u[static_cast<std::size_t>(i)] = 2.0 * bessel_i(i, kappa);
        z += spec.u[static_cast<std::size_t>(i)];
    }
    for (auto& c : spec.u)
        c /= z;
    return spec;
}

void embed(const FeatureMapSpec& spec, double alpha, double* out) {
    const int s = spec.s;
    out[0] = std::sqrt(spec.u[0]);
    for (int i = 1; i <= s; ++i) {
        const double root = std::sqrt(spec.u[static_cast<std::size_t>(i)]);
        const double angle = static_cast<double>(i) * alpha;
        out[i] = root * std::cos(angle);
        out[s + i] = root * std::sin(angle);
    }
}

std::vector<double> embed(const FeatureMapSpec& spec, double alpha) {
    std::vector<double> out(static_cast<std::size_t>(spec.dim()));
    embed(spec, alpha, out.data());
    return out;
}

double kernel_value(const FeatureMapSpec& spec, double delta) {
    double acc = spec.u[0];
    for (int i = 1; i <= spec.s; ++i)
        acc += spec.u[static_cast<std::size_t>(i)] * std::cos(static_cast<double>(i) * delta);
    return acc;
}

AngleMapping AngleMapping::linear(double lo, double hi) {
    if (!(hi >= lo))
        throw std::invalid_argument("AngleMapping: domain_max must be >= domain_min");
    return AngleMapping{lo, hi, false};
}

AngleMapping AngleMapping::angular() {
    return AngleMapping{0.0, 0.0, true};
}

double to_angle(const AngleMapping& mapping, double coordinate) {
    if (mapping.periodic)
        return coordinate;
    if (coordinate < mapping.domain_min || coordinate > mapping.domain_max)
        throw std::out_of_range("to_angle: coordinate outside mapping domain");
    const double width = mapping.domain_max - mapping.domain_min;
    if (width == 0.0)
        return 0.0;
    return std::numbers::pi * (coordinate - mapping.domain_min) / width;
}

} // namespace emk
