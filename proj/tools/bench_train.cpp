// Scratch timing probe for the desk-scale budget; not installed.
#include <chrono>
#include <cstdio>

#include "ad2/commands.hpp"

using namespace ad2;
using Clock = std::chrono::steady_clock;

static double secs(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

int main(int argc, char** argv) {
    const int pairs = argc > 1 ? std::atoi(argv[1]) : 200;
    const int epochs = argc > 2 ? std::atoi(argv[2]) : 1;

    cli::RunConfig cfg;
    cfg.dataset.train_total = pairs;
    cfg.dataset.test_total = std::max(20, pairs / 5);
    const auto t0 = Clock::now();
    const std::string cache = "/tmp/bench_ds_cache_" + std::to_string(pairs);
    datakit::SplitPair split;
    if (std::filesystem::exists(cache + "/train/index.jsonl")) {
        split.train = datakit::load_split(cache, "train");
        split.test = datakit::load_split(cache, "test");
    } else {
        split = cli::generate_dataset(cfg, "/tmp/bench_ds", false);
        datakit::save_split(split.train, cache, "train");
        datakit::save_split(split.test, cache, "test");
    }
    const auto t1 = Clock::now();
    std::printf("dataset: %d train / %d test pairs in %.1f s\n",
                static_cast<int>(split.train.size()), static_cast<int>(split.test.size()),
                secs(t0, t1));

    detector::TrainConfig tc;
    tc.epochs = epochs;
    tc.batch = 16;
    detector::Ad2Config arch;
    if (argc > 4) arch.pool = std::atoi(argv[4]);
    if (argc > 3) tc.lr = std::atof(argv[3]);
    tc.seed = 7;
    const auto t2 = Clock::now();
    auto [model, hist] = detector::train(split.train, tc, arch, true);
    const auto t3 = Clock::now();
    std::printf("ad2 train: %d epochs in %.1f s (%.2f s/epoch), final train acc %.3f\n", epochs,
                secs(t2, t3), secs(t2, t3) / epochs, hist.epoch_accuracy.back());

    baselines::DiffNetConfig dc;
    dc.epochs = 3;
    dc.input_w = split.train[0].curr[0].width;
    dc.input_h = split.train[0].curr[0].height;
    auto dn = baselines::DiffNetModel::make(dc);
    const auto t4 = Clock::now();
    dn.train(split.train, true);
    const auto t5 = Clock::now();
    std::printf("diffnet train: 1 epoch in %.1f s\n", secs(t4, t5));

    methods::Ad2Method m1(model);
    methods::DiffNetMethod m2(dn);
    dataset::Dataset bench_set(split.test.begin(),
                               split.test.begin() + std::min<std::size_t>(split.test.size(), 50));
    std::printf("ad2 infer: %.3f ms, diffnet infer: %.3f ms (params %ld vs %ld)\n",
                datakit::bench(m1, bench_set, 3), datakit::bench(m2, bench_set, 3),
                model.param_count(), dn.param_count());

    for (datakit::Method* m : {static_cast<datakit::Method*>(&m1), static_cast<datakit::Method*>(&m2)}) {
        const auto rep = datakit::evaluate(*m, split.test);
        std::printf("%s test acc %.3f | tpr b %.2f p %.2f s %.2f e %.2f\n", m->name(), rep.accuracy,
                    rep.tpr[0], rep.tpr[1], rep.tpr[2], rep.tpr[3]);
        std::printf("  confusion:");
        for (int t = 0; t < 4; ++t) {
            std::printf(" [");
            for (int p = 0; p < 4; ++p) std::printf(" %ld", rep.confusion[t][p]);
            std::printf(" ]");
        }
        std::printf("\n");
    }
    return 0;
}
