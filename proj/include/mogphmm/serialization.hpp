#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mogphmm/cascade.hpp"
#include "mogphmm/errors.hpp"
#include "mogphmm/evolve.hpp"
#include "mogphmm/experiment.hpp"
#include "mogphmm/gp_tree.hpp"
#include "mogphmm/hmm.hpp"
#include "mogphmm/lifelog.hpp"
#include "mogphmm/synthesis.hpp"

namespace mogphmm {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

namespace detail {

inline const char* kind_name(NodeKind k)
{
    switch (k) {
    case NodeKind::UnaryMinus:
        return "neg";
    case NodeKind::Add:
        return "add";
    case NodeKind::Subtract:
        return "sub";
    case NodeKind::Multiply:
        return "mul";
    case NodeKind::AnalyticQuotient:
        return "aq";
    case NodeKind::FeatureRef:
        return "feature";
    case NodeKind::Constant:
        return "constant";
    }
    return "";
}

inline NodeKind kind_from_name(const std::string& s)
{
    for (NodeKind k : {NodeKind::UnaryMinus, NodeKind::Add, NodeKind::Subtract, NodeKind::Multiply,
                       NodeKind::AnalyticQuotient, NodeKind::FeatureRef, NodeKind::Constant}) {
        if (s == kind_name(k)) {
            return k;
        }
    }
    throw DataError("unknown tree node kind '" + s + "'");
}

inline Json tree_node_json(std::span<const Node> nodes, std::size_t& pos)
{
    const Node& n = nodes[pos++];
    Json j;
    j["kind"] = kind_name(n.kind);
    if (n.kind == NodeKind::FeatureRef) {
        j["index"] = n.feature;
    } else if (n.kind == NodeKind::Constant) {
        j["value"] = n.value;
    } else {
        Json children = Json::array();
        for (int c = 0; c < arity(n.kind); ++c) {
            children.push_back(tree_node_json(nodes, pos));
        }
        j["children"] = std::move(children);
    }
    return j;
}

inline void tree_nodes_from_json(const Json& j, std::vector<Node>& out)
{
    NodeKind const kind = kind_from_name(j.at("kind").get<std::string>());
    if (kind == NodeKind::FeatureRef) {
        out.push_back(Node::feature_ref(j.at("index").get<std::uint32_t>()));
        return;
    }
    if (kind == NodeKind::Constant) {
        out.push_back(Node::constant(j.at("value").get<double>()));
        return;
    }
    const Json& children = j.at("children");
    if (!children.is_array() || static_cast<int>(children.size()) != arity(kind)) {
        throw DataError(std::string("node '") + kind_name(kind) + "' has the wrong number of children");
    }
    out.push_back(Node::op(kind));
    for (const Json& c : children) {
        tree_nodes_from_json(c, out);
    }
}

// Converts nlohmann parse/type errors into the library's error types.
template <class Error, class F>
auto guarded(const std::string& what, F&& f)
{
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw Error(what + ": " + e.what());
    }
}

inline void check_version(const Json& j, const std::string& what)
{
    if (!j.contains("version") || j.at("version").get<int>() != kFormatVersion) {
        throw DataError(what + ": missing or unsupported version (expected " + std::to_string(kFormatVersion) + ")");
    }
}

} // namespace detail

inline Json tree_to_json(const GpTree& tree)
{
    std::size_t pos = 0;
    return detail::tree_node_json(tree.nodes(), pos);
}

inline GpTree tree_from_json(const Json& j)
{
    return detail::guarded<DataError>("tree JSON", [&] {
        std::vector<Node> nodes;
        detail::tree_nodes_from_json(j, nodes);
        return GpTree(std::move(nodes));
    });
}

inline Json to_json(const BinaryClassifier& c)
{
    return Json{{"tree", tree_to_json(c.tree)},
                {"prefix", to_prefix(c.tree)},
                {"threshold", c.threshold},
                {"error", c.error},
                {"target_class", c.target_class},
                {"response_sentinel", c.response_sentinel},
                {"scaling", Json{{"offset", c.scaling.offset}, {"scale", c.scaling.scale}}}};
}

inline BinaryClassifier classifier_from_json(const Json& j)
{
    return detail::guarded<DataError>("classifier JSON", [&] {
        BinaryClassifier c;
        c.tree = tree_from_json(j.at("tree"));
        c.threshold = j.at("threshold").get<double>();
        c.error = j.at("error").get<double>();
        c.target_class = j.at("target_class").get<int>();
        c.response_sentinel = j.value("response_sentinel", kDefaultResponseSentinel);
        if (j.contains("scaling")) {
            c.scaling.offset = j.at("scaling").at("offset").get<std::vector<double>>();
            c.scaling.scale = j.at("scaling").at("scale").get<std::vector<double>>();
            if (c.scaling.offset.size() != c.scaling.scale.size()) {
                throw DataError("classifier JSON: scaling offset and scale differ in length");
            }
            for (double v : c.scaling.scale) {
                if (!(v > 0.0) || !std::isfinite(v)) {
                    throw DataError("classifier JSON: scaling factors must be positive and finite");
                }
            }
        }
        return c;
    });
}

inline Json to_json(const CascadeClassifier& cascade)
{
    Json stages = Json::array();
    for (const BinaryClassifier& s : cascade.stages()) {
        stages.push_back(to_json(s));
    }
    return Json{{"version", kFormatVersion},
                {"K", cascade.class_count()},
                {"M", cascade.observation_count()},
                {"stages", std::move(stages)}};
}

inline CascadeClassifier cascade_from_json(const Json& j)
{
    return detail::guarded<DataError>("cascade JSON", [&] {
        detail::check_version(j, "cascade JSON");
        std::vector<BinaryClassifier> stages;
        for (const Json& s : j.at("stages")) {
            stages.push_back(classifier_from_json(s));
        }
        CascadeClassifier c(std::move(stages));
        if (c.class_count() != j.at("K").get<int>() || c.observation_count() != j.at("M").get<int>()) {
            throw DataError("cascade JSON: K/M disagree with the stage list");
        }
        return c;
    });
}

inline Json to_json(const HmmModel& m)
{
    auto matrix = [](const Matrix& x) {
        Json rows = Json::array();
        for (std::size_t r = 0; r < x.rows(); ++r) {
            auto const row = x.row(r);
            rows.push_back(std::vector<double>(row.begin(), row.end()));
        }
        return rows;
    };
    return Json{{"version", kFormatVersion}, {"K", m.K},          {"M", m.M},         {"pi", m.pi},
                {"A", matrix(m.A)},          {"B", matrix(m.B)}, {"alpha", m.alpha}};
}

inline HmmModel hmm_from_json(const Json& j)
{
    return detail::guarded<DataError>("HMM JSON", [&] {
        detail::check_version(j, "HMM JSON");
        HmmModel m;
        m.K = j.at("K").get<int>();
        m.M = j.at("M").get<int>();
        m.pi = j.at("pi").get<std::vector<double>>();
        m.alpha = j.at("alpha").get<double>();
        auto matrix = [](const Json& rows, std::size_t n_rows, std::size_t n_cols, const char* name) {
            if (!rows.is_array() || rows.size() != n_rows) {
                throw DataError(std::string("HMM JSON: ") + name + " has the wrong number of rows");
            }
            Matrix x(n_rows, n_cols);
            for (std::size_t r = 0; r < n_rows; ++r) {
                auto const row = rows[r].get<std::vector<double>>();
                if (row.size() != n_cols) {
                    throw DataError(std::string("HMM JSON: ") + name + " row " + std::to_string(r) +
                                    " has the wrong length");
                }
                for (std::size_t c = 0; c < n_cols; ++c) {
                    x(r, c) = row[c];
                }
            }
            return x;
        };
        if (m.K < 1 || m.M < 1) {
            throw DataError("HMM JSON: K and M must be >= 1");
        }
        m.A = matrix(j.at("A"), static_cast<std::size_t>(m.K), static_cast<std::size_t>(m.K), "A");
        m.B = matrix(j.at("B"), static_cast<std::size_t>(m.K), static_cast<std::size_t>(m.M), "B");
        m.validate_shape();
        return m;
    });
}

// ---------------------------------------------------------------------------
// Configuration. Every field has a default; a config file only needs the keys
// it changes.

inline Json to_json(const EvolutionConfig& c)
{
    return Json{{"population_size", c.population_size},
                {"max_evaluations", c.max_evaluations},
                {"crossover_probability", c.crossover_probability},
                {"mutation_probability", c.mutation_probability},
                {"tree_depth", c.tree_depth},
                {"tournament_size", c.tournament_size},
                {"max_offspring_depth", c.max_offspring_depth},
                {"use_constants", c.use_constants},
                {"standardize_features", c.standardize_features},
                {"response_sentinel", c.response_sentinel},
                {"seed", c.seed}};
}

inline Json to_json(const LabelRule& r)
{
    return Json{{"thresholds", r.thresholds}, {"weights", r.weights}};
}

inline Json to_json(const NoiseConfig& n)
{
    return Json{{"level", n.level}, {"grid", n.grid}, {"seed", n.seed}, {"perturb_features", n.perturb_features}};
}

inline Json to_json(const ExperimentConfig& c)
{
    return Json{{"evolution", to_json(c.evolution)},
                {"noise", to_json(c.noise)},
                {"label_rule", to_json(c.rule)},
                {"samples_per_class", c.samples_per_class},
                {"folds", c.folds},
                {"split_fraction", c.split_fraction},
                {"hmm", Json{{"alpha", c.hmm.alpha}, {"initial_from_sequence_start", c.hmm.initial_from_sequence_start}}},
                {"shuffled_folds", c.shuffled_folds},
                {"include_baseline", c.include_baseline},
                {"seed", c.seed},
                {"threads", c.threads}};
}

namespace detail {

template <class T>
void read_opt(const Json& j, const char* key, T& field)
{
    if (j.contains(key)) {
        field = j.at(key).get<T>();
    }
}

} // namespace detail

inline ExperimentConfig experiment_config_from_json(const Json& j)
{
    return detail::guarded<ConfigError>("config", [&] {
        using detail::read_opt;
        ExperimentConfig c;
        if (!j.is_object()) {
            throw ConfigError("config must be a JSON object");
        }
        if (j.contains("evolution")) {
            const Json& e = j.at("evolution");
            read_opt(e, "population_size", c.evolution.population_size);
            read_opt(e, "max_evaluations", c.evolution.max_evaluations);
            read_opt(e, "crossover_probability", c.evolution.crossover_probability);
            read_opt(e, "mutation_probability", c.evolution.mutation_probability);
            read_opt(e, "tree_depth", c.evolution.tree_depth);
            read_opt(e, "tournament_size", c.evolution.tournament_size);
            read_opt(e, "max_offspring_depth", c.evolution.max_offspring_depth);
            read_opt(e, "use_constants", c.evolution.use_constants);
            read_opt(e, "standardize_features", c.evolution.standardize_features);
            read_opt(e, "response_sentinel", c.evolution.response_sentinel);
            read_opt(e, "seed", c.evolution.seed);
        }
        if (j.contains("noise")) {
            const Json& n = j.at("noise");
            read_opt(n, "level", c.noise.level);
            read_opt(n, "grid", c.noise.grid);
            read_opt(n, "seed", c.noise.seed);
            read_opt(n, "perturb_features", c.noise.perturb_features);
        }
        if (j.contains("label_rule")) {
            read_opt(j.at("label_rule"), "thresholds", c.rule.thresholds);
            read_opt(j.at("label_rule"), "weights", c.rule.weights);
        }
        read_opt(j, "samples_per_class", c.samples_per_class);
        read_opt(j, "folds", c.folds);
        read_opt(j, "split_fraction", c.split_fraction);
        if (j.contains("hmm")) {
            read_opt(j.at("hmm"), "alpha", c.hmm.alpha);
            read_opt(j.at("hmm"), "initial_from_sequence_start", c.hmm.initial_from_sequence_start);
        }
        read_opt(j, "shuffled_folds", c.shuffled_folds);
        read_opt(j, "include_baseline", c.include_baseline);
        read_opt(j, "seed", c.seed);
        read_opt(j, "threads", c.threads);
        c.validate();
        return c;
    });
}

inline Json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

inline void write_json_file(const Json& j, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out << j.dump(2) << '\n';
}

} // namespace mogphmm
