#pragma once

#include <vector>

namespace emk {

// Explicit feature map approximating the normalized Von Mises kernel on
// angles. The map sends an angle to a (2s+1)-dimensional vector whose inner
// products reproduce a truncated Fourier series of the kernel. Coefficients
// are normalized to sum to one, so the embedded kernel value at zero offset
// is exactly 1 and every embedding has unit norm.
struct FeatureMapSpec {
    double kappa = 0.0;      // kernel shape; lower kappa, wider kernel
    int s = 0;               // frequency count
    std::vector<double> u;   // Fourier coefficients u_0..u_s, sum to 1

    int dim() const { return 2 * s + 1; }
};

// Modified Bessel function of the first kind, integer order, by power
// series. Truncates when a term drops below 1e-16 of the running sum;
// adequate for the kappa <= 32 range supported here.
double bessel_i(int order, double x);

// Maximum kappa accepted by build_feature_map_spec.
inline constexpr double kMaxKappa = 32.0;

FeatureMapSpec build_feature_map_spec(double kappa, int s);

// out must hold spec.dim() values; layout is
// (sqrt(u0), sqrt(u1)cos(a), ..., sqrt(us)cos(sa), sqrt(u1)sin(a), ..., sqrt(us)sin(sa)).
void embed(const FeatureMapSpec& spec, double alpha, double* out);
std::vector<double> embed(const FeatureMapSpec& spec, double alpha);

// Truncated kernel signature: sum_i u_i cos(i*delta). Equals
// embed(a).embed(b) for any a-b = delta.
double kernel_value(const FeatureMapSpec& spec, double delta);

// Affine map from a coordinate interval onto angles in [0, pi]. Periodic
// mappings pass angles through unchanged. A zero-width domain maps its
// single admissible coordinate to angle 0.
struct AngleMapping {
    double domain_min = 0.0;
    double domain_max = 0.0;
    bool periodic = false;

    static AngleMapping linear(double lo, double hi);
    static AngleMapping angular();
};

double to_angle(const AngleMapping& mapping, double coordinate);

} // namespace emk
