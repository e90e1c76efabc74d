#pragma once

// Self-describing model checkpoints: a binary file with a JSON header
// (architecture, standardizers, feature setup, calibration) followed by the
// flat parameter vector as little-endian 64-bit floats, plus a JSON sidecar
// summary for quick inspection.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "shockfusion/field_io.hpp"
#include "shockfusion/neural.hpp"
#include "shockfusion/shock_features.hpp"

namespace shockfusion::ckpt {

inline constexpr char kMagic[8] = {'S', 'H', 'F', 'C', 'K', 'P', 'T', '1'};

struct Checkpoint {
    nn::FusionModel model;
    features::ShockCalibration calibration;
    features::WeightParams weights;
    features::FeatureOptions feature_opts;
    std::string variant_tag = "shock_aware";
    io::ConditionKind condition_kind = io::ConditionKind::back_pressure;
    std::vector<std::string> channel_names = {"U"};
    bool use_shock_features = true;           // raw (c0, c1) trunk when false
    bool condition_includes_station = false;  // branch input [cond, x_s(cond)]
};

namespace detail {

inline nlohmann::json blocks_to_json(const std::vector<nn::BlockSpec>& blocks) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& b : blocks)
        arr.push_back({{"in", b.in_dim},
                       {"out", b.out_dim},
                       {"dropout", b.dropout_rate},
                       {"layernorm", b.has_layernorm},
                       {"activation", b.activation == nn::Activation::swish ? "swish" : "identity"}});
    return arr;
}

inline std::vector<nn::BlockSpec> blocks_from_json(const nlohmann::json& arr) {
    std::vector<nn::BlockSpec> blocks;
    for (const auto& j : arr) {
        nn::BlockSpec b;
        b.in_dim = j.at("in").get<int>();
        b.out_dim = j.at("out").get<int>();
        b.dropout_rate = j.at("dropout").get<double>();
        b.has_layernorm = j.at("layernorm").get<bool>();
        b.activation = j.at("activation").get<std::string>() == "swish" ? nn::Activation::swish
                                                                        : nn::Activation::identity;
        blocks.push_back(b);
    }
    return blocks;
}

inline nlohmann::json standardizer_to_json(const nn::Standardizer& s) {
    return {{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
            {"std", std::vector<double>(s.std.data(), s.std.data() + s.std.size())}};
}

inline nn::Standardizer standardizer_from_json(const nlohmann::json& j) {
    nn::Standardizer s;
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto std_ = j.at("std").get<std::vector<double>>();
    s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), Eigen::Index(mean.size()));
    s.std = Eigen::Map<const Eigen::VectorXd>(std_.data(), Eigen::Index(std_.size()));
    return s;
}

}  // namespace detail

inline nlohmann::json checkpoint_header(const Checkpoint& c) {
    const auto& spec = c.model.spec;
    nlohmann::json j;
    j["format_version"] = 1;
    j["variant"] = c.variant_tag;
    j["condition_kind"] = io::to_string(c.condition_kind);
    j["channels"] = c.channel_names;
    j["use_shock_features"] = c.use_shock_features;
    j["condition_includes_station"] = c.condition_includes_station;
    j["rng_seed"] = c.model.rng_seed;
    j["architecture"] = {
        {"variant", spec.variant == nn::FusionVariant::hadamard_fusion ? "hadamard_fusion"
                                                                       : "dot_product"},
        {"fusion_dim", spec.fusion_dim},
        {"out_dim", spec.out_dim},
        {"branch", detail::blocks_to_json(spec.branch_blocks)},
        {"trunk", detail::blocks_to_json(spec.trunk_blocks)},
        {"decoder", detail::blocks_to_json(spec.decoder_blocks)},
    };
    j["standardizers"] = {{"condition", detail::standardizer_to_json(c.model.cond_std)},
                          {"trunk", detail::standardizer_to_json(c.model.trunk_std)},
                          {"output", detail::standardizer_to_json(c.model.out_std)}};
    j["weights"] = {{"alpha", c.weights.alpha},   {"beta", c.weights.beta},
                    {"lambda", c.weights.lambda}, {"k", c.weights.k},
                    {"q_clip", c.weights.q_clip}, {"gamma", c.weights.gamma},
                    {"eps_rel", c.weights.eps_rel}, {"use_rel_weight", c.weights.use_rel_weight}};
    j["features"] = {{"shock_axis", c.feature_opts.shock_axis},
                     {"tanh_indicator", c.feature_opts.tanh_indicator},
                     {"include_wall_distance", c.feature_opts.include_wall_distance},
                     {"dx_min", c.feature_opts.dx_min},
                     {"envelope_floor", c.feature_opts.envelope_floor}};
    j["calibration"] = {{"a0", c.calibration.a0},
                        {"a1", c.calibration.a1},
                        {"residual", c.calibration.residual}};
    j["parameter_count"] = c.model.parameter_count();
    return j;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
    const std::string header = checkpoint_header(c).dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint to '" + path + "'");
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t header_len = header.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header.data(), std::streamsize(header.size()));
    const std::uint64_t n = std::uint64_t(c.model.params.size());
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(c.model.params.data()),
              std::streamsize(n * sizeof(double)));
    if (!out) throw IoError("short write while saving checkpoint '" + path + "'");
    // sidecar summary
    std::ofstream side(path + ".json");
    if (!side) throw IoError("cannot write checkpoint sidecar for '" + path + "'");
    side << checkpoint_header(c).dump(2) << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw MalformedHeader("'" + path + "' is not a checkpoint file");
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header(header_len, '\0');
    in.read(header.data(), std::streamsize(header_len));
    if (!in) throw MalformedHeader("truncated checkpoint header in '" + path + "'");
    nlohmann::json j = nlohmann::json::parse(header);

    Checkpoint c;
    c.variant_tag = j.at("variant").get<std::string>();
    c.condition_kind = io::condition_kind_from_string(j.at("condition_kind").get<std::string>());
    c.channel_names = j.at("channels").get<std::vector<std::string>>();
    c.use_shock_features = j.at("use_shock_features").get<bool>();
    c.condition_includes_station = j.at("condition_includes_station").get<bool>();

    nn::ArchitectureSpec spec;
    const auto& ja = j.at("architecture");
    spec.variant = ja.at("variant").get<std::string>() == "hadamard_fusion"
                       ? nn::FusionVariant::hadamard_fusion
                       : nn::FusionVariant::dot_product;
    spec.fusion_dim = ja.at("fusion_dim").get<int>();
    spec.out_dim = ja.at("out_dim").get<int>();
    spec.branch_blocks = detail::blocks_from_json(ja.at("branch"));
    spec.trunk_blocks = detail::blocks_from_json(ja.at("trunk"));
    spec.decoder_blocks = detail::blocks_from_json(ja.at("decoder"));
    c.model = nn::FusionModel(spec);
    c.model.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    c.model.cond_std = detail::standardizer_from_json(j.at("standardizers").at("condition"));
    c.model.trunk_std = detail::standardizer_from_json(j.at("standardizers").at("trunk"));
    c.model.out_std = detail::standardizer_from_json(j.at("standardizers").at("output"));

    const auto& jw = j.at("weights");
    c.weights.alpha = jw.at("alpha").get<double>();
    c.weights.beta = jw.at("beta").get<double>();
    c.weights.lambda = jw.at("lambda").get<double>();
    c.weights.k = jw.at("k").get<double>();
    c.weights.q_clip = jw.at("q_clip").get<double>();
    c.weights.gamma = jw.at("gamma").get<double>();
    c.weights.eps_rel = jw.at("eps_rel").get<double>();
    c.weights.use_rel_weight = jw.at("use_rel_weight").get<bool>();

    const auto& jf = j.at("features");
    c.feature_opts.shock_axis = jf.at("shock_axis").get<int>();
    c.feature_opts.tanh_indicator = jf.at("tanh_indicator").get<bool>();
    c.feature_opts.include_wall_distance = jf.at("include_wall_distance").get<bool>();
    c.feature_opts.dx_min = jf.at("dx_min").get<double>();
    c.feature_opts.envelope_floor = jf.at("envelope_floor").get<double>();

    c.calibration.a0 = j.at("calibration").at("a0").get<double>();
    c.calibration.a1 = j.at("calibration").at("a1").get<double>();
    c.calibration.residual = j.at("calibration").at("residual").get<double>();

    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in || n != std::uint64_t(c.model.parameter_count()))
        throw LengthMismatch("checkpoint parameter count does not match its architecture");
    in.read(reinterpret_cast<char*>(c.model.params.data()), std::streamsize(n * sizeof(double)));
    if (!in) throw LengthMismatch("truncated parameter block in '" + path + "'");
    return c;
}

}  // namespace shockfusion::ckpt
