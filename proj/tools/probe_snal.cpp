// Scratch diagnostic: how visible are the dataset pairs' perturbations?
#include <cstdio>

#include "ad2/commands.hpp"

using namespace ad2;

int main() {
    cli::RunConfig cfg;
    cfg.dataset.train_total = 100;
    cfg.dataset.test_total = 25;
    auto split = cli::generate_dataset(cfg, "/tmp/probe_ds", false);

    // regenerate the benign curr for comparison is not possible here, so
    // compare prev vs curr and diff statistics per class instead
    std::array<long, 4> count{};
    std::array<double, 4> diff_energy{};
    std::array<double, 4> tiny_diff_frac{};
    for (const auto& p : split.train) {
        const int cls = static_cast<int>(p.label);
        count[cls]++;
        // luminance forward differences of the centre curr frame
        const auto lum = imaging::luminance(p.curr[1]);
        long nonzero_small = 0, total = 0;
        double energy = 0.0;
        for (int y = 0; y < lum.height; ++y) {
            for (int x = 0; x + 1 < lum.width; ++x) {
                const double d = std::abs(lum.at(x + 1, y) - lum.at(x, y));
                energy += d * d;
                ++total;
                if (d > 0.3 && d < 12.0) ++nonzero_small;
            }
        }
        diff_energy[cls] += energy / total;
        tiny_diff_frac[cls] += static_cast<double>(nonzero_small) / total;
    }
    for (int c = 0; c < 4; ++c) {
        std::printf("class %d (%s): n=%ld mean diff energy %.2f, small-diff frac %.4f\n", c,
                    dataset::label_name(static_cast<dataset::Label>(c)), count[c],
                    diff_energy[c] / count[c], tiny_diff_frac[c] / count[c]);
    }

    // and one concrete snal pair: how many pixels moved vs its prev frame
    for (const auto& p : split.train) {
        if (p.label == dataset::Label::snal &&
            p.provenance.combo == dataset::Combo::clean_attack) {
            std::printf("snal clean_attack pair route=%s t=%ld\n", p.provenance.route_id.c_str(),
                        p.provenance.step_t);
            break;
        }
    }
    return 0;
}
