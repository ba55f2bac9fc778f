#include "mrom/geometry.hpp"
#include "mrom/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace mrom {

void GeometryDescriptor::validate() const {
    if (!(throat_radius > 0.0))
        throw GeometryError("geometry: throat_radius must be positive");
    if (!(length > 0.0))
        throw GeometryError("geometry: length must be positive");
    if (!(height > 0.0))
        throw GeometryError("geometry: height must be positive");
    if (!(throat_length > 0.0) || throat_length > length)
        throw GeometryError("geometry: throat_length must lie in (0, length]");
    if (throat_center < 0.0 || throat_center > length)
        throw GeometryError("geometry: throat_center must lie in [0, length]");
    // h(x) > 0 for all x: the minimum of the profile is min(D/2, S_r).
    if (!(std::min(height / 2.0, throat_radius) > 0.0))
        throw GeometryError("geometry: half-height profile is not positive");
}

double half_height_profile(const GeometryDescriptor& g, double x) {
    if (x < 0.0 || x > g.length)
        throw std::domain_error("half_height_profile: x outside [0, L]");
    const double half = g.height / 2.0;
    const double u = x - g.throat_center;
    if (std::abs(u) > g.throat_length / 2.0)
        return half;
    const double c = std::cos(std::numbers::pi * u / g.throat_length);
    return half - (half - g.throat_radius) * c * c;
}

double analytic_area(const GeometryDescriptor& g) {
    const double half = g.height / 2.0;
    const double a = std::max(0.0, g.throat_center - g.throat_length / 2.0);
    const double b = std::min(g.length, g.throat_center + g.throat_length / 2.0);
    double bump = 0.0;
    if (b > a) {
        // antiderivative of cos^2(pi u / S_l) is u/2 + S_l sin(2 pi u / S_l)/(4 pi)
        auto prim = [&](double x) {
            const double u = x - g.throat_center;
            return u / 2.0 + g.throat_length *
                                 std::sin(2.0 * std::numbers::pi * u / g.throat_length) /
                                 (4.0 * std::numbers::pi);
        };
        bump = prim(b) - prim(a);
    }
    return g.length * g.height - 2.0 * (half - g.throat_radius) * bump;
}

bool contains(const GeometryDescriptor& g, double x, double y) {
    if (x < 0.0 || x > g.length)
        return false;
    return std::abs(y) <= half_height_profile(g, x);
}

std::string to_string(const GeometryDescriptor& g) {
    std::ostringstream os;
    os.precision(17);
    os << "(S_r=" << g.throat_radius << ", S_l=" << g.throat_length
       << ", S_x=" << g.throat_center << ", L=" << g.length << ", D=" << g.height << ")";
    return os.str();
}

} // namespace mrom
