#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ad2/world.hpp"

namespace ad2::svg {

// Standalone lane-deviation plot: signed L_dev polyline over time, attacked
// steps shaded. Display-only artifact, no GUI.
inline std::string ldev_plot(const world::EpisodeReport& rep, double dt) {
    const int W = 900, H = 320;
    const int ml = 56, mr = 16, mt = 28, mb = 40;
    const int pw = W - ml - mr, ph = H - mt - mb;
    const std::size_t n = std::max<std::size_t>(rep.ldev_trace.size(), 1);

    double ymax = 1.0;
    for (double v : rep.ldev_trace) ymax = std::max(ymax, std::abs(v));
    ymax = std::ceil(ymax * 1.1 * 2.0) / 2.0;

    auto sx = [&](std::size_t i) {
        return ml + static_cast<double>(pw) * static_cast<double>(i) /
                        static_cast<double>(std::max<std::size_t>(n - 1, 1));
    };
    auto sy = [&](double v) { return mt + ph / 2.0 - v / ymax * (ph / 2.0); };

    char buf[256];
    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(W) +
           "\" height=\"" + std::to_string(H) + "\" viewBox=\"0 0 " + std::to_string(W) + " " +
           std::to_string(H) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // attacked-step bands (merged runs)
    std::size_t i = 0;
    while (i < rep.attacked_trace.size()) {
        if (!rep.attacked_trace[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < rep.attacked_trace.size() && rep.attacked_trace[j + 1]) ++j;
        std::snprintf(buf, sizeof(buf),
                      "<rect x=\"%.2f\" y=\"%d\" width=\"%.2f\" height=\"%d\" fill=\"#fddcdc\"/>\n",
                      sx(i), mt, std::max(sx(j) - sx(i), 1.0), ph);
        out += buf;
        i = j + 1;
    }

    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%.2f\" x2=\"%d\" y2=\"%.2f\" stroke=\"#888\"/>\n", ml,
                  sy(0.0), W - mr, sy(0.0));
    out += buf;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"#222\"/>\n", ml, mt, ml,
                  H - mb);
    out += buf;

    out += "<polyline fill=\"none\" stroke=\"#1453a3\" stroke-width=\"1.2\" points=\"";
    for (std::size_t k = 0; k < rep.ldev_trace.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", sx(k), sy(rep.ldev_trace[k]));
        out += buf;
    }
    out += "\"/>\n";

    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">L_dev (m),"
                  " route %s, seed %llu</text>\n",
                  ml, rep.route_id.c_str(), static_cast<unsigned long long>(rep.seed));
    out += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"8\" y=\"%.2f\" font-family=\"sans-serif\" font-size=\"11\">%+.1f</text>\n",
                  sy(ymax) + 4, ymax);
    out += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"8\" y=\"%.2f\" font-family=\"sans-serif\" font-size=\"11\">%+.1f</text>\n",
                  sy(-ymax) + 4, -ymax);
    out += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"11\">t = %.1f s"
                  " (%zu steps)</text>\n",
                  W - 180, H - 14, static_cast<double>(n) * dt, rep.ldev_trace.size());
    out += buf;
    out += "</svg>\n";
    return out;
}

}  // namespace ad2::svg
