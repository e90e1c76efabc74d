// Command-line entry point: data generation, calibration, training,
// prediction and evaluation behind one executable with a shared JSON config.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "shockfusion/burgers.hpp"
#include "shockfusion/checkpoint.hpp"
#include "shockfusion/config.hpp"
#include "shockfusion/evaluation.hpp"
#include "shockfusion/field_io.hpp"
#include "shockfusion/pipeline.hpp"

namespace fs = std::filesystem;
using namespace shockfusion;

namespace {

constexpr const char* kBuildId = "shockfusion-1.0";

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = "runs";
    std::string manifest_path;
    std::uint64_t seed = 0;
};

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot hash missing input '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a64(bytes);
}

void write_run_manifest(const GlobalOpts& g, const std::string& command,
                        const config::AppConfig& cfg, const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs) {
    nlohmann::json j;
    j["command"] = command;
    j["build"] = kBuildId;
    j["seed"] = g.seed;
    j["config"] = config::config_snapshot(cfg);
    for (const auto& p : inputs) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(hash_file(p)));
        j["inputs"][p] = buf;
    }
    j["outputs"] = outputs;
    fs::create_directories(g.out_dir);
    std::ofstream out(fs::path(g.out_dir) / "run_manifest.json");
    if (!out) throw IoError("cannot write run manifest into '" + g.out_dir + "'");
    out << j.dump(2) << '\n';
}

std::vector<io::CaseRecord> load_cases_from(const std::string& manifest_path) {
    if (manifest_path.empty()) throw ConfigError("a --manifest path is required");
    return io::load_cases(manifest_path);
}

std::string out_path(const GlobalOpts& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    return (fs::path(g.out_dir) / name).string();
}

// ---------------------------------------------------------------------------

void cmd_gen_burgers(const GlobalOpts& g, const config::AppConfig& cfg) {
    auto train_paths = burgers::generate_burgers_dataset(
        cfg.burgers.nu_train(), cfg.burgers.solver, g.out_dir, "manifest_train.json",
        cfg.burgers.strides);
    auto test_paths = burgers::generate_burgers_dataset(
        cfg.burgers.nu_test(), cfg.burgers.solver, g.out_dir, "manifest_test.json",
        cfg.burgers.strides);
    std::vector<std::string> outputs = train_paths;
    outputs.insert(outputs.end(), test_paths.begin(), test_paths.end());
    outputs.push_back(out_path(g, "manifest_train.json"));
    outputs.push_back(out_path(g, "manifest_test.json"));
    for (const auto& p : outputs) std::cout << p << '\n';
    write_run_manifest(g, "gen-burgers", cfg, {}, outputs);
}

void cmd_calibrate(const GlobalOpts& g, const config::AppConfig& cfg, bool robust) {
    auto cases = load_cases_from(g.manifest_path);
    const int axis = pipeline::default_shock_axis(cases.front().condition_kind);
    auto cal = pipeline::calibrate_cases(cases, axis, false);
    nlohmann::json j;
    j["a0"] = cal.a0;
    j["a1"] = cal.a1;
    j["residual"] = cal.residual;
    j["shock_axis"] = axis;
    for (const auto& [cond, station] : cal.per_case)
        j["per_case"].push_back({{"condition", cond}, {"station", station}});
    if (robust) {
        auto rc = pipeline::calibrate_cases(cases, axis, true);
        j["robust"] = {{"a0", rc.a0}, {"a1", rc.a1}, {"residual", rc.residual}};
    }
    const std::string path = out_path(g, "calibration.json");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
    std::cout << "calibration: station(c) = " << cal.a0 << " + " << cal.a1
              << "*c  (rms residual " << cal.residual << ")\n";
    write_run_manifest(g, "calibrate", cfg, {g.manifest_path}, {path});
}

void cmd_train(const GlobalOpts& g, config::AppConfig cfg, const std::string& variant_name) {
    auto cases = load_cases_from(g.manifest_path);
    const pipeline::Variant variant = pipeline::variant_from_string(variant_name);
    cfg.pipeline.train.seed = g.seed;
    pipeline::TrainedVariant trained = pipeline::train_variant(cases, variant, cfg.pipeline);

    const std::string tag = pipeline::to_string(variant);
    const std::string ckpt_path = out_path(g, "model_" + tag + ".ckpt");
    const std::string hist_path = out_path(g, "history_" + tag + ".csv");
    ckpt::save_checkpoint(ckpt_path, trained.checkpoint);
    trained.history.save_csv(hist_path);

    std::map<std::string, int> phase_epochs;
    for (const auto& e : trained.history.epochs) ++phase_epochs[e.phase];
    std::cout << "variant " << tag << ": best val loss " << trained.history.best_val << '\n';
    for (const auto& [phase, n] : phase_epochs)
        std::cout << "  phase " << phase << ": " << n << " epochs\n";
    std::cout << "checkpoint: " << ckpt_path << '\n';
    write_run_manifest(g, "train", cfg, {g.manifest_path}, {ckpt_path, hist_path});
}

void cmd_predict(const GlobalOpts& g, const config::AppConfig& cfg,
                 const std::string& ckpt_path, int mc_samples) {
    ckpt::Checkpoint c = ckpt::load_checkpoint(ckpt_path);
    auto cases = load_cases_from(g.manifest_path);
    std::vector<std::string> outputs;
    auto rng = make_rng(g.seed, "mc_dropout");
    for (const auto& rec : cases) {
        Eigen::MatrixXd pred;
        std::vector<io::Column> extra;
        if (mc_samples > 0) {
            auto [cond, trunk] = pipeline::checkpoint_inputs(c, rec);
            nn::McDropoutResult mc = nn::mc_dropout_predict(c.model, cond, trunk, mc_samples, rng);
            pred = mc.mean;
            for (Eigen::Index ch = 0; ch < mc.sigma.cols(); ++ch)
                extra.push_back({"Sigma_" + c.channel_names[std::size_t(ch)],
                                 {mc.sigma.col(ch).data(), mc.sigma.col(ch).data() + mc.sigma.rows()}});
        } else {
            pred = pipeline::predict_case(c, rec);
        }
        std::vector<double> pred_u(pred.col(0).data(), pred.col(0).data() + pred.rows());
        std::vector<double> pred_v;
        if (pred.cols() > 1) pred_v.assign(pred.col(1).data(), pred.col(1).data() + pred.rows());
        const std::string name = "pred_" + fs::path(rec.source_path).filename().string();
        const std::string path = out_path(g, name);
        io::write_file(path, io::write_prediction_file(rec, pred_u, pred_v, 1e-9, extra));
        std::cout << path << '\n';
        outputs.push_back(path);
    }
    write_run_manifest(g, "predict", cfg, {ckpt_path, g.manifest_path}, outputs);
}

void cmd_eval(const GlobalOpts& g, const config::AppConfig& cfg, const std::string& ckpt_path,
              const std::string& pred_path, const std::string& truth_path) {
    std::vector<eval::MetricsReport> reports;
    std::vector<std::string> inputs;
    if (!pred_path.empty()) {
        // file-vs-file mode: prediction columns against a truth file
        if (truth_path.empty()) throw ConfigError("--pred requires --truth");
        io::CaseRecord pred = io::parse_tecplot_file(pred_path);
        io::CaseRecord truth = io::parse_tecplot_file(truth_path);
        std::vector<std::string> channels = {"U"};
        if (truth.zones.front().find("V") && pred.zones.front().find("V"))
            channels.push_back("V");
        std::vector<std::vector<double>> truth_ch, pred_ch;
        for (const auto& ch : channels) {
            std::vector<double> tv, pv;
            for (const auto& z : truth.zones) {
                const auto& v = z.require(ch).values;
                tv.insert(tv.end(), v.begin(), v.end());
            }
            for (const auto& z : pred.zones) {
                const auto& v = z.require(ch).values;
                pv.insert(pv.end(), v.begin(), v.end());
            }
            truth_ch.push_back(std::move(tv));
            pred_ch.push_back(std::move(pv));
        }
        reports.push_back(eval::make_report("file", truth.condition,
                                            fs::path(truth_path).filename().string(), channels,
                                            truth_ch, pred_ch));
        inputs = {pred_path, truth_path};
    } else {
        if (ckpt_path.empty()) throw ConfigError("eval needs --checkpoint or --pred/--truth");
        ckpt::Checkpoint c = ckpt::load_checkpoint(ckpt_path);
        for (const auto& rec : load_cases_from(g.manifest_path))
            reports.push_back(pipeline::evaluate_case(c, rec));
        inputs = {ckpt_path, g.manifest_path};
    }
    const std::string csv_path = out_path(g, "metrics.csv");
    const std::string json_path = out_path(g, "metrics.json");
    eval::save_reports_csv(csv_path, reports);
    eval::save_reports_json(json_path, reports);
    for (const auto& r : reports)
        std::cout << r.model_tag << ' ' << r.case_label << " joint relL2 " << r.joint_rel_l2
                  << '\n';
    write_run_manifest(g, "eval", cfg, inputs, {csv_path, json_path});
}

void cmd_compare(const GlobalOpts& g, const config::AppConfig& cfg,
                 const std::string& test_manifest, std::vector<std::uint64_t> seeds) {
    auto train_cases = load_cases_from(g.manifest_path);
    auto test_cases = load_cases_from(test_manifest);
    if (seeds.empty()) seeds = {g.seed + 1, g.seed + 2, g.seed + 3};
    pipeline::CompareResult res =
        pipeline::compare_models(train_cases, test_cases, cfg.pipeline, seeds);
    const std::string csv_path = out_path(g, "compare.csv");
    const std::string json_path = out_path(g, "compare.json");
    eval::save_reports_csv(csv_path, res.reports);
    nlohmann::json j;
    for (const auto& r : res.reports) j["reports"].push_back(r.to_json());
    j["median_joint_rel_l2"] = res.median_joint;
    j["improvement_vs_vanilla_pct"] = res.improvement_pct;
    std::ofstream out(json_path);
    out << j.dump(2) << '\n';
    for (const auto& [tag, med] : res.median_joint)
        std::cout << tag << ": median joint relL2 " << med << " (" << res.improvement_pct.at(tag)
                  << "% vs vanilla)\n";
    write_run_manifest(g, "compare", cfg, {g.manifest_path, test_manifest},
                       {csv_path, json_path});
}

void cmd_ablate(const GlobalOpts& g, config::AppConfig cfg, const std::string& test_manifest) {
    auto train_cases = load_cases_from(g.manifest_path);
    auto test_cases = load_cases_from(test_manifest);
    double lo = train_cases.front().condition, hi = lo;
    for (const auto& rec : train_cases) {
        lo = std::min(lo, rec.condition);
        hi = std::max(hi, rec.condition);
    }
    const io::CaseRecord* interp = nullptr;
    for (const auto& rec : test_cases)
        if (rec.condition >= lo && rec.condition <= hi) interp = &rec;
    if (!interp)
        throw EmptySelection("no test case lies inside the training condition range");
    cfg.pipeline.train.seed = g.seed;
    auto reports = pipeline::run_ablation(train_cases, *interp, cfg.pipeline);
    const std::string csv_path = out_path(g, "ablation.csv");
    const std::string json_path = out_path(g, "ablation.json");
    eval::save_reports_csv(csv_path, reports);
    eval::save_reports_json(json_path, reports);
    for (const auto& r : reports)
        for (const auto& c : r.channels)
            std::cout << r.model_tag << ' ' << c.name << " NRMSE " << c.nrmse_pct << "% NMAE "
                      << c.nmae_pct << "%\n";
    write_run_manifest(g, "ablate", cfg, {g.manifest_path, test_manifest},
                       {csv_path, json_path});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shock-aware operator-network surrogate toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--config", g.config_path, "JSON config file");
    app.add_option("--seed", g.seed, "root seed for all stochastic components");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--manifest", g.manifest_path, "dataset manifest path");

    // flag overrides applied after the config file (defaults < file < flags)
    double dropout = -1.0, lr = -1.0, noise = -1.0, val_fraction = -1.0;
    int batch_size = -1, warmup_epochs = -1, focus_epochs = -1, cosine_epochs = -1;
    app.add_option("--dropout", dropout, "dropout rate override");
    app.add_option("--lr", lr, "initial learning rate override");
    app.add_option("--noise-std", noise, "trunk input noise override");
    app.add_option("--val-fraction", val_fraction, "validation group fraction override");
    app.add_option("--batch-size", batch_size, "batch size override");
    app.add_option("--warmup-epochs", warmup_epochs, "warmup phase epoch cap");
    app.add_option("--focus-epochs", focus_epochs, "focus phase epoch cap");
    app.add_option("--cosine-epochs", cosine_epochs, "cosine fine-tune epochs");

    auto* gen = app.add_subcommand("gen-burgers", "generate the Burgers reference dataset");
    int nx = -1, nt = -1;
    double t_end = -1.0;
    gen->add_option("--nx", nx, "grid points");
    gen->add_option("--nt", nt, "time levels");
    gen->add_option("--t-end", t_end, "final time");

    auto* cal = app.add_subcommand("calibrate", "fit the shock station against the condition");
    bool robust = false;
    cal->add_flag("--robust", robust, "also fit Huber-IRLS coefficients");

    auto* tr = app.add_subcommand("train", "train one model variant");
    std::string variant = "shock_aware";
    tr->add_option("--variant", variant, "shock_aware|fusion|vanilla|<ablation tag>");

    auto* pr = app.add_subcommand("predict", "write prediction files for a manifest");
    std::string ckpt_path;
    int mc_samples = 0;
    pr->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
    pr->add_option("--mc-samples", mc_samples, "MC-dropout samples (adds sigma columns)");

    auto* ev = app.add_subcommand("eval", "compute metrics for a checkpoint or prediction file");
    std::string eval_ckpt, pred_path, truth_path;
    ev->add_option("--checkpoint", eval_ckpt, "model checkpoint");
    ev->add_option("--pred", pred_path, "prediction file (file-vs-file mode)");
    ev->add_option("--truth", truth_path, "truth file (file-vs-file mode)");

    auto* cmp = app.add_subcommand("compare", "train and compare the shock-aware model against the baselines");
    std::string test_manifest_cmp;
    std::vector<std::uint64_t> seeds;
    cmp->add_option("--test-manifest", test_manifest_cmp, "held-out manifest")->required();
    cmp->add_option("--seeds", seeds, "seeds for the statistical comparison");

    auto* abl = app.add_subcommand("ablate", "run the five-variant ablation suite");
    std::string test_manifest_abl;
    abl->add_option("--test-manifest", test_manifest_abl, "held-out manifest")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        config::AppConfig cfg;
        if (!g.config_path.empty()) cfg = config::load_config(g.config_path);
        if (dropout >= 0.0) cfg.pipeline.dropout = dropout;
        if (lr > 0.0) cfg.pipeline.train.lr = lr;
        if (noise >= 0.0) cfg.pipeline.train.noise_std = noise;
        if (val_fraction > 0.0) cfg.pipeline.train.val_fraction = val_fraction;
        if (batch_size > 0) cfg.pipeline.train.batch_size = batch_size;
        if (warmup_epochs > 0 && !cfg.pipeline.train.phases.empty())
            cfg.pipeline.train.phases.front().max_epochs = warmup_epochs;
        if (focus_epochs > 0 && cfg.pipeline.train.phases.size() > 1)
            cfg.pipeline.train.phases.back().max_epochs = focus_epochs;
        if (cosine_epochs >= 0) cfg.pipeline.train.cosine_epochs = cosine_epochs;
        if (nx > 0) cfg.burgers.solver.nx = nx;
        if (nt > 0) cfg.burgers.solver.nt = nt;
        if (t_end > 0.0) cfg.burgers.solver.t_end = t_end;

        if (gen->parsed()) cmd_gen_burgers(g, cfg);
        else if (cal->parsed()) cmd_calibrate(g, cfg, robust);
        else if (tr->parsed()) cmd_train(g, cfg, variant);
        else if (pr->parsed()) cmd_predict(g, cfg, ckpt_path, mc_samples);
        else if (ev->parsed()) cmd_eval(g, cfg, eval_ckpt, pred_path, truth_path);
        else if (cmp->parsed()) cmd_compare(g, cfg, test_manifest_cmp, seeds);
        else if (abl->parsed()) cmd_ablate(g, cfg, test_manifest_abl);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
