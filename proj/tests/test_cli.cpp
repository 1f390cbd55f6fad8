#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>

#include "ad2/commands.hpp"

using namespace ad2;
using cli::run_command;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

json fast_sim_config() {
    json doc;
    doc["seed"] = 7;
    doc["sim"] = {{"blocked_timeout_s", 20.0}, {"timeout_s", 200.0}};
    return doc;
}

}  // namespace

TEST_CASE("config validation lists every offending key and exits 2") {
    json doc;
    doc["seed"] = 1;
    doc["bogus_top"] = 1;
    doc["route"] = {{"family", "test"}, {"wrong_key", 2}, {"other_wrong", 3}};
    const auto out = fresh_dir("ad2_cli_badcfg");
    REQUIRE(run_command("simulate", doc, out, {}) == 2);

    REQUIRE_THROWS_WITH(cli::parse_config(doc), Catch::Contains("bogus_top"));
    json doc2;
    doc2["route"] = {{"wrong_key", 2}, {"other_wrong", 3}};
    REQUIRE_THROWS_WITH(cli::parse_config(doc2),
                        Catch::Contains("wrong_key") && Catch::Contains("other_wrong"));
}

TEST_CASE("unknown command and missing out dir are config errors") {
    REQUIRE(run_command("fly", json::object(), "/tmp/x", {}) == 2);
    REQUIRE(run_command("simulate", json::object(), "", {}) == 2);
}

TEST_CASE("simulate: nominal benign run writes the full artifact set") {
    const auto out = fresh_dir("ad2_cli_sim");
    REQUIRE(run_command("simulate", fast_sim_config(), out, {}) == 0);

    const json report = json::parse(slurp(out + "/report.json"));
    REQUIRE(report.contains("DS"));
    REQUIRE(report.at("tests").at("in_route") == "Success");
    REQUIRE(report.at("tests").at("blocked") == "Success");
    REQUIRE(report.at("tests").at("timeout") == "Success");
    REQUIRE(report.at("DS").get<double>() >= 90.0);

    const std::string csv = slurp(out + "/ldev.csv");
    REQUIRE(csv.rfind("step,t_seconds,ldev_m,attacked\n", 0) == 0);
    REQUIRE(std::filesystem::exists(out + "/ldev.svg"));
}

TEST_CASE("simulate: attacked run marks every step and repeats byte-identically") {
    const auto out1 = fresh_dir("ad2_cli_atk1");
    json doc = fast_sim_config();
    doc["attack"] = {{"kind", "poltergeist"}, {"interval_d", 1}};
    REQUIRE(run_command("simulate", doc, out1, {}) == 0);

    const std::string csv = slurp(out1 + "/ldev.csv");
    std::size_t lines = 0, attacked = 0, pos = csv.find('\n') + 1;
    while (pos < csv.size()) {
        const auto next = csv.find('\n', pos);
        if (next == std::string::npos) break;
        ++lines;
        if (csv.compare(next - 2, 2, ",1") == 0) ++attacked;
        pos = next + 1;
    }
    REQUIRE(lines > 0);
    REQUIRE(attacked == lines);  // d=1 attacks every step

    const auto out2 = fresh_dir("ad2_cli_atk2");
    REQUIRE(run_command("simulate", doc, out2, {}) == 0);
    REQUIRE(slurp(out1 + "/report.json") == slurp(out2 + "/report.json"));
}

TEST_CASE("overrides: dotted paths reach nested attack fields") {
    const auto out = fresh_dir("ad2_cli_override");
    json doc = fast_sim_config();
    doc["attack"] = {{"kind", "esia"}, {"interval_d", 1}};
    REQUIRE(run_command("simulate", doc, out, {"attack.interval_d=4"}) == 0);
    const json report = json::parse(slurp(out + "/report.json"));
    const long steps = report.at("steps").get<long>();
    const long attacked = report.at("attacked_steps").get<long>();
    REQUIRE(attacked == (steps + 3) / 4);
}

TEST_CASE("sweep: axis rows, summary header, nested reports") {
    const auto out = fresh_dir("ad2_cli_sweep");
    json doc = fast_sim_config();
    doc["attack"] = {{"kind", "snal"}, {"interval_d", 4}};
    REQUIRE(run_command("sweep", doc, out, {}, "epsilon=4,8") == 0);

    const std::string summary = slurp(out + "/summary.csv");
    REQUIRE(summary.rfind("axis_value,DS,P,R,ldev_mean,ldev_std\n", 0) == 0);
    REQUIRE(std::count(summary.begin(), summary.end(), '\n') == 3);  // header + 2 rows
    REQUIRE(std::filesystem::exists(out + "/epsilon=4/report.json"));
    REQUIRE(std::filesystem::exists(out + "/epsilon=8/report.json"));

    // axis/kind mismatch is a config error
    REQUIRE(run_command("sweep", doc, fresh_dir("ad2_cli_sweep2"), {}, "severity=low") == 2);
    // severity sweep over an esia config
    json esia = fast_sim_config();
    esia["attack"] = {{"kind", "esia"}, {"interval_d", 4}};
    const auto out3 = fresh_dir("ad2_cli_sweep3");
    REQUIRE(run_command("sweep", esia, out3, {}, "severity=low,med,high") == 0);
    const std::string sev_summary = slurp(out3 + "/summary.csv");
    REQUIRE(std::count(sev_summary.begin(), sev_summary.end(), '\n') == 4);
}

TEST_CASE("train without a dataset is a runtime error (exit 3)") {
    const auto out = fresh_dir("ad2_cli_notrain");
    REQUIRE(run_command("train", json::object(), out, {}) == 3);
}

TEST_CASE("pipeline: gen-dataset, train both models, eval, bench") {
    const auto out = fresh_dir("ad2_cli_pipeline");
    json doc;
    doc["seed"] = 7;
    doc["sim"] = {{"image_width", 48}, {"image_height", 32}};
    doc["dataset"] = {{"train_total", 40}, {"test_total", 20}, {"episode_s", 40}};
    doc["train"] = {{"epochs", 1}, {"batch", 8}, {"diffnet_epochs", 1}};
    doc["eval"] = {{"kpca_q", 6}, {"rff_m", 64}, {"bench_repeats", 1}, {"bench_count", 4}};

    REQUIRE(run_command("gen-dataset", doc, out, {}) == 0);
    const json info = json::parse(slurp(out + "/dataset/dataset.json"));
    REQUIRE(info.at("train_counts") == json({16, 8, 8, 8}));
    REQUIRE(info.at("test_counts") == json({8, 4, 4, 4}));

    REQUIRE(run_command("train", doc, out, {}) == 0);
    REQUIRE(std::filesystem::exists(out + "/model.bin"));
    REQUIRE(std::filesystem::exists(out + "/model.bin.json"));
    REQUIRE(std::filesystem::exists(out + "/history.json"));
    const json hist = json::parse(slurp(out + "/history.json"));
    REQUIRE(hist.at("epoch_loss").size() == 1);
    REQUIRE(std::isfinite(hist.at("epoch_loss")[0].get<double>()));

    json diff_doc = doc;
    diff_doc["train"]["method"] = "diffnet";
    REQUIRE(run_command("train", diff_doc, out, {}) == 0);
    REQUIRE(std::filesystem::exists(out + "/model_diffnet.bin"));

    REQUIRE(run_command("eval", doc, out, {}) == 0);
    const std::string csv = slurp(out + "/eval.csv");
    REQUIRE(csv.rfind("method,accuracy,auc_benign,auc_polt,auc_snal,auc_esia,"
                      "tpr_benign,tpr_polt,tpr_snal,tpr_esia,"
                      "fpr_benign,fpr_polt,fpr_snal,fpr_esia\n",
                      0) == 0);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 6);  // header + 5 methods

    REQUIRE(run_command("bench", doc, out, {}) == 0);
    const std::string bench_csv = slurp(out + "/bench.csv");
    REQUIRE(bench_csv.rfind("method,median_ms,params\n", 0) == 0);
    REQUIRE(bench_csv.find("ad2,") != std::string::npos);
    REQUIRE(bench_csv.find("diffnet,") != std::string::npos);

    std::filesystem::remove_all(out);
}
