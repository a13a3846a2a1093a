#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

#include "manet/jet.hpp"

namespace manet {

enum class DomainKind { Disk, Square, Flower };

/// Source/target region: membership test, boundary parameterization on
/// t in [0,1), area, and a midpoint quadrature rule.
class Domain {
public:
    static Domain disk(Vec2 center, double radius) {
        Domain d;
        d.kind_ = DomainKind::Disk;
        d.center_ = center;
        d.radius_ = radius;
        return d;
    }

    static Domain square(Vec2 center, double half_side) {
        Domain d;
        d.kind_ = DomainKind::Square;
        d.center_ = center;
        d.half_side_ = half_side;
        return d;
    }

    /// Flower r(phi) = 1 + amplitude*cos(lobes*phi), centered at the origin.
    static Domain flower(double amplitude = 0.1, int lobes = 10) {
        Domain d;
        d.kind_ = DomainKind::Flower;
        d.amplitude_ = amplitude;
        d.lobes_ = lobes;
        return d;
    }

    DomainKind kind() const { return kind_; }
    Vec2 center() const { return center_; }
    double radius() const { return radius_; }
    double half_side() const { return half_side_; }

    double area() const {
        switch (kind_) {
            case DomainKind::Disk: return std::numbers::pi * radius_ * radius_;
            case DomainKind::Square: return 4.0 * half_side_ * half_side_;
            case DomainKind::Flower:
                return std::numbers::pi * (1.0 + 0.5 * amplitude_ * amplitude_);
        }
        return 0.0;
    }

    bool contains(Vec2 p) const {
        switch (kind_) {
            case DomainKind::Disk: {
                const Vec2 d = p - center_;
                return d.x * d.x + d.y * d.y <= radius_ * radius_;
            }
            case DomainKind::Square:
                return std::abs(p.x - center_.x) <= half_side_ &&
                       std::abs(p.y - center_.y) <= half_side_;
            case DomainKind::Flower: {
                const double r = norm(p);
                return r <= flower_radius(std::atan2(p.y, p.x));
            }
        }
        return false;
    }

    /// Point on the boundary; bijective on t in [0,1).
    Vec2 boundary_param(double t) const {
        t -= std::floor(t);
        switch (kind_) {
            case DomainKind::Disk: {
                const double phi = 2.0 * std::numbers::pi * t;
                return center_ + radius_ * Vec2{std::cos(phi), std::sin(phi)};
            }
            case DomainKind::Square: {
                // counter-clockwise from the lower-left corner, even in perimeter
                const double s = 4.0 * t;
                const int edge = static_cast<int>(s);
                const double u = s - edge;
                const double h = half_side_;
                switch (edge) {
                    case 0: return center_ + Vec2{-h + 2.0 * h * u, -h};
                    case 1: return center_ + Vec2{h, -h + 2.0 * h * u};
                    case 2: return center_ + Vec2{h - 2.0 * h * u, h};
                    default: return center_ + Vec2{-h, h - 2.0 * h * u};
                }
            }
            case DomainKind::Flower: {
                const double phi = 2.0 * std::numbers::pi * t;
                return flower_radius(phi) * Vec2{std::cos(phi), std::sin(phi)};
            }
        }
        return {};
    }

    double boundary_length() const {
        switch (kind_) {
            case DomainKind::Disk: return 2.0 * std::numbers::pi * radius_;
            case DomainKind::Square: return 8.0 * half_side_;
            case DomainKind::Flower: {
                // arc length of r(phi); midpoint rule on a fine fixed grid
                const int n = 1 << 14;
                const double dphi = 2.0 * std::numbers::pi / n;
                double len = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double phi = (i + 0.5) * dphi;
                    const double r = flower_radius(phi);
                    const double dr = -amplitude_ * lobes_ * std::sin(lobes_ * phi);
                    len += std::sqrt(r * r + dr * dr) * dphi;
                }
                return len;
            }
        }
        return 0.0;
    }

    struct BBox {
        double xmin, xmax, ymin, ymax;
    };

    BBox bounding_box() const {
        switch (kind_) {
            case DomainKind::Disk:
                return {center_.x - radius_, center_.x + radius_, center_.y - radius_,
                        center_.y + radius_};
            case DomainKind::Square:
                return {center_.x - half_side_, center_.x + half_side_, center_.y - half_side_,
                        center_.y + half_side_};
            case DomainKind::Flower: {
                const double r = 1.0 + amplitude_;
                return {-r, r, -r, r};
            }
        }
        return {};
    }

    /// Midpoint quadrature of fn over the domain (polar for disk/flower,
    /// Cartesian for square).
    double integrate(const std::function<double(Vec2)>& fn, int rows, int cols) const {
        if (rows < 1 || cols < 1) throw std::invalid_argument("integrate: rows/cols must be >= 1");
        double sum = 0.0;
        switch (kind_) {
            case DomainKind::Disk: {
                const double dr = radius_ / rows;
                const double dphi = 2.0 * std::numbers::pi / cols;
                for (int i = 0; i < rows; ++i) {
                    const double r = (i + 0.5) * dr;
                    for (int j = 0; j < cols; ++j) {
                        const double phi = (j + 0.5) * dphi;
                        const Vec2 p = center_ + r * Vec2{std::cos(phi), std::sin(phi)};
                        sum += fn(p) * r * dr * dphi;
                    }
                }
                return sum;
            }
            case DomainKind::Square: {
                const double dx = 2.0 * half_side_ / rows;
                const double dy = 2.0 * half_side_ / cols;
                for (int i = 0; i < rows; ++i) {
                    const double x = center_.x - half_side_ + (i + 0.5) * dx;
                    for (int j = 0; j < cols; ++j) {
                        const double y = center_.y - half_side_ + (j + 0.5) * dy;
                        sum += fn({x, y}) * dx * dy;
                    }
                }
                return sum;
            }
            case DomainKind::Flower: {
                const double dphi = 2.0 * std::numbers::pi / cols;
                for (int j = 0; j < cols; ++j) {
                    const double phi = (j + 0.5) * dphi;
                    const double rmax = flower_radius(phi);
                    const double dr = rmax / rows;
                    for (int i = 0; i < rows; ++i) {
                        const double r = (i + 0.5) * dr;
                        const Vec2 p = r * Vec2{std::cos(phi), std::sin(phi)};
                        sum += fn(p) * r * dr * dphi;
                    }
                }
                return sum;
            }
        }
        return sum;
    }

    double flower_radius(double phi) const { return 1.0 + amplitude_ * std::cos(lobes_ * phi); }
    double flower_amplitude() const { return amplitude_; }
    int flower_lobes() const { return lobes_; }

private:
    DomainKind kind_ = DomainKind::Disk;
    Vec2 center_{0.0, 0.0};
    double radius_ = 1.0;
    double half_side_ = 0.5;
    double amplitude_ = 0.1;
    int lobes_ = 10;
};

}  // namespace manet
