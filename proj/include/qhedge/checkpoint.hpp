#ifndef QHEDGE_CHECKPOINT_HPP
#define QHEDGE_CHECKPOINT_HPP

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "qhedge/config.hpp"
#include "qhedge/dtsoc.hpp"
#include "qhedge/rlqh.hpp"

namespace qhedge {

inline constexpr int kCheckpointFormatVersion = 1;

/// Everything needed to reuse a trained agent: weights plus the market,
/// instrument, and friction setup it was trained under, and the config
/// fingerprint + seed for provenance.
struct DtsocCheckpoint {
    DtsocAgent agent;
    MarketConfig market;
    ContractSpec contract;
    CostSpec cost;
    DtsocTrainConfig train;
    std::string fingerprint;
    std::uint64_t base_seed = 0;
    Real y0_train = 0.0;
};

struct RlqhCheckpoint {
    RlqhAgent agent;
    MarketConfig market;
    ContractSpec contract;
    CostSpec cost;
    RlqhTrainConfig train;
    std::string fingerprint;
    std::uint64_t base_seed = 0;
    Real y0_train = 0.0;
};

namespace detail {

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("checkpoint not found: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("cannot parse checkpoint " + path + ": " + e.what());
    }
    return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + p.parent_path().string());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

inline void check_header(const nlohmann::json& j, const std::string& path,
                         const std::string& expected_kind) {
    const std::string kind = j.value("kind", "");
    if (kind != expected_kind)
        throw ConfigError("checkpoint " + path + " holds a '" + kind + "' agent, expected '" +
                          expected_kind + "'");
    const int version = j.value("format_version", -1);
    if (version != kCheckpointFormatVersion)
        throw IoError("checkpoint " + path + " has format version " + std::to_string(version) +
                      ", this build reads " + std::to_string(kCheckpointFormatVersion));
}

}  // namespace detail

inline void save_dtsoc_checkpoint(const std::string& path, const DtsocCheckpoint& cp) {
    nlohmann::json nets = nlohmann::json::array();
    for (const auto& net : cp.agent.nets) nets.push_back(net);
    const nlohmann::json j{{"kind", "dtsoc"},
                           {"format_version", kCheckpointFormatVersion},
                           {"fingerprint", cp.fingerprint},
                           {"base_seed", cp.base_seed},
                           {"y0_train", cp.y0_train},
                           {"market", cp.market},
                           {"contract", cp.contract},
                           {"cost", cp.cost},
                           {"train", cp.train},
                           {"net_spec", cp.agent.net_spec},
                           {"shared", cp.agent.shared},
                           {"n_steps", cp.agent.n_steps},
                           {"scaler", cp.agent.scaler},
                           {"strike_disc", cp.agent.strike_disc},
                           {"nets", nets}};
    detail::write_text_file(path, j.dump(2) + "\n");
}

inline DtsocCheckpoint load_dtsoc_checkpoint(const std::string& path) {
    const nlohmann::json j = detail::read_json_file(path);
    detail::check_header(j, path, "dtsoc");
    DtsocCheckpoint cp;
    try {
        j.at("fingerprint").get_to(cp.fingerprint);
        j.at("base_seed").get_to(cp.base_seed);
        j.at("y0_train").get_to(cp.y0_train);
        j.at("market").get_to(cp.market);
        j.at("contract").get_to(cp.contract);
        j.at("cost").get_to(cp.cost);
        j.at("train").get_to(cp.train);
        j.at("net_spec").get_to(cp.agent.net_spec);
        j.at("shared").get_to(cp.agent.shared);
        j.at("n_steps").get_to(cp.agent.n_steps);
        j.at("scaler").get_to(cp.agent.scaler);
        j.at("strike_disc").get_to(cp.agent.strike_disc);
        cp.agent.nets.clear();
        for (const auto& jn : j.at("nets")) cp.agent.nets.push_back(jn.get<Mlp>());
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed dtsoc checkpoint " + path + ": " + e.what());
    }
    cp.agent.contract = cp.contract;
    const std::size_t expected = cp.agent.shared ? 1 : static_cast<std::size_t>(cp.agent.n_steps);
    if (cp.agent.nets.size() != expected)
        throw IoError("dtsoc checkpoint " + path + " has " + std::to_string(cp.agent.nets.size()) +
                      " nets, expected " + std::to_string(expected));
    return cp;
}

inline void save_rlqh_checkpoint(const std::string& path, const RlqhCheckpoint& cp) {
    if (!cp.agent.core) throw std::invalid_argument("save_rlqh_checkpoint: empty agent");
    const nlohmann::json j{{"kind", "rlqh"},
                           {"format_version", kCheckpointFormatVersion},
                           {"fingerprint", cp.fingerprint},
                           {"base_seed", cp.base_seed},
                           {"y0_train", cp.y0_train},
                           {"market", cp.market},
                           {"contract", cp.contract},
                           {"cost", cp.cost},
                           {"train", cp.train},
                           {"core", *cp.agent.core},
                           {"scaler", cp.agent.scaler},
                           {"strike_disc", cp.agent.strike_disc},
                           {"n_steps", cp.agent.n_steps}};
    detail::write_text_file(path, j.dump(2) + "\n");
}

inline RlqhCheckpoint load_rlqh_checkpoint(const std::string& path) {
    const nlohmann::json j = detail::read_json_file(path);
    detail::check_header(j, path, "rlqh");
    RlqhCheckpoint cp;
    try {
        j.at("fingerprint").get_to(cp.fingerprint);
        j.at("base_seed").get_to(cp.base_seed);
        j.at("y0_train").get_to(cp.y0_train);
        j.at("market").get_to(cp.market);
        j.at("contract").get_to(cp.contract);
        j.at("cost").get_to(cp.cost);
        j.at("train").get_to(cp.train);
        cp.agent.core = std::make_shared<RlqhCore>(j.at("core").get<RlqhCore>());
        j.at("scaler").get_to(cp.agent.scaler);
        j.at("strike_disc").get_to(cp.agent.strike_disc);
        j.at("n_steps").get_to(cp.agent.n_steps);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed rlqh checkpoint " + path + ": " + e.what());
    }
    cp.agent.contract = cp.contract;
    return cp;
}

}  // namespace qhedge

#endif
