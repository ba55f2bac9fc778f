#ifndef MROM_GEOMETRY_HPP
#define MROM_GEOMETRY_HPP

#include <string>

namespace mrom {

/// Parametric description of a 2D Venturi channel: a straight channel of
/// length `length` and full height `height`, with a smooth symmetric
/// coarctation (throat) of half-height `throat_radius`, axial extent
/// `throat_length`, centered at `throat_center`. All lengths in cm.
struct GeometryDescriptor {
    double throat_radius = 0.2;  // S_r, half-height at the throat center
    double throat_length = 2.0;  // S_l, axial extent of the coarctation
    double throat_center = 2.5;  // S_x, axial position of the throat center
    double length = 5.0;         // L
    double height = 0.4;         // D

    /// Throws GeometryError if any invariant is violated.
    void validate() const;

    bool operator==(const GeometryDescriptor&) const = default;
};

/// Channel half-height h(x). The coarctation is a C^1 cosine-squared bump:
/// h(x) = D/2 - (D/2 - S_r) cos^2(pi (x - S_x)/S_l) for |x - S_x| <= S_l/2,
/// and D/2 outside. Throws std::domain_error for x outside [0, L].
double half_height_profile(const GeometryDescriptor& g, double x);

/// Exact area of the channel, integral of 2 h(x) over [0, L].
double analytic_area(const GeometryDescriptor& g);

/// True if the point lies inside the channel (boundary included).
bool contains(const GeometryDescriptor& g, double x, double y);

std::string to_string(const GeometryDescriptor& g);

} // namespace mrom

#endif
