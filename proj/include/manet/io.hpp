#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "manet/evaluate.hpp"
#include "manet/jet.hpp"
#include "manet/optimize.hpp"

namespace manet {

namespace detail {

/// Shortest round-trip decimal form so identical runs give identical text.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline void write_points_csv(const std::string& path, const std::vector<Vec2>& pts) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "x1,x2\n";
    for (const Vec2& p : pts)
        out << detail::fmt_double(p.x) << ',' << detail::fmt_double(p.y) << '\n';
}

/// One row per iteration; the termination reason appears on the final row.
inline void write_run_csv(const std::string& path, const RunRecord& record) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "iter,time_s,loss_total,loss_interior,loss_convexity,loss_boundary,nmae,"
           "termination_reason\n";
    for (std::size_t i = 0; i < record.rows.size(); ++i) {
        const RunRow& r = record.rows[i];
        out << r.iter << ',' << detail::fmt_double(r.time_s) << ','
            << detail::fmt_double(r.loss.total) << ',' << detail::fmt_double(r.loss.interior)
            << ',' << detail::fmt_double(r.loss.convexity) << ','
            << detail::fmt_double(r.loss.boundary) << ',';
        if (std::isfinite(r.metric)) out << detail::fmt_double(r.metric);
        out << ',';
        if (i + 1 == record.rows.size()) out << to_string(record.reason);
        out << '\n';
    }
}

inline void write_error_map_csv(const std::string& path, const ErrorMap& em) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "x1,x2,abs_error\n";
    for (std::size_t i = 0; i < em.grid.size(); ++i)
        out << detail::fmt_double(em.grid[i].x) << ',' << detail::fmt_double(em.grid[i].y) << ','
            << detail::fmt_double(em.abs_error[i]) << '\n';
}

inline void write_image_csv(const std::string& path, const BinnedImage& img) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "row,col,value\n";
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c)
            out << r << ',' << c << ',' << detail::fmt_double(img.at(r, c)) << '\n';
}

namespace detail {

/// 16-bit binary PGM (P5, maxval 65535, big-endian samples).
inline void write_pgm16(const std::string& path, const std::vector<double>& values, int rows,
                        int cols) {
    double vmax = 0.0;
    for (double v : values) vmax = std::max(vmax, v);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "P5\n" << cols << ' ' << rows << "\n65535\n";
    for (double v : values) {
        const double scaled = vmax > 0.0 ? v / vmax : 0.0;
        const auto q = static_cast<std::uint16_t>(std::lround(scaled * 65535.0));
        const char bytes[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xff)};
        out.write(bytes, 2);
    }
}

}  // namespace detail

inline void write_image_pgm(const std::string& path, const BinnedImage& img) {
    detail::write_pgm16(path, img.mass, img.rows, img.cols);
}

inline void write_error_map_pgm(const std::string& path, const ErrorMap& em) {
    detail::write_pgm16(path, em.abs_error, em.rows, em.cols);
}

}  // namespace manet
