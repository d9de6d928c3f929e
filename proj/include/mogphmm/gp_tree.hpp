#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mogphmm/errors.hpp"
#include "mogphmm/random.hpp"

namespace mogphmm {

enum class NodeKind : std::uint8_t {
    UnaryMinus,
    Add,
    Subtract,
    Multiply,
    AnalyticQuotient,
    FeatureRef,
    Constant,
};

constexpr int arity(NodeKind kind) noexcept
{
    switch (kind) {
    case NodeKind::UnaryMinus:
        return 1;
    case NodeKind::Add:
    case NodeKind::Subtract:
    case NodeKind::Multiply:
    case NodeKind::AnalyticQuotient:
        return 2;
    case NodeKind::FeatureRef:
    case NodeKind::Constant:
        return 0;
    }
    return 0;
}

constexpr bool is_terminal(NodeKind kind) noexcept { return arity(kind) == 0; }

// a / sqrt(1 + b^2): a smooth stand-in for division with no pole at b = 0.
inline double analytic_quotient(double a, double b) noexcept
{
    return a / std::sqrt(1.0 + b * b);
}

struct Node {
    NodeKind kind = NodeKind::Constant;
    std::uint32_t feature = 0; // FeatureRef only
    double value = 0.0;        // Constant only

    static constexpr Node op(NodeKind kind) noexcept { return Node{kind, 0, 0.0}; }
    static constexpr Node feature_ref(std::uint32_t index) noexcept
    {
        return Node{NodeKind::FeatureRef, index, 0.0};
    }
    static constexpr Node constant(double v) noexcept { return Node{NodeKind::Constant, 0, v}; }

    friend bool operator==(const Node& a, const Node& b) noexcept
    {
        if (a.kind != b.kind) {
            return false;
        }
        if (a.kind == NodeKind::FeatureRef) {
            return a.feature == b.feature;
        }
        if (a.kind == NodeKind::Constant) {
            // bitwise identity so that serialization round-trips are checked exactly
            return std::bit_cast<std::uint64_t>(a.value) == std::bit_cast<std::uint64_t>(b.value);
        }
        return true;
    }
};

constexpr double kDefaultResponseSentinel = 1e300;

// Immutable expression tree stored as a prefix-ordered node array. A subtree
// rooted at index i occupies the contiguous range [i, subtree_end(i)).
class GpTree {
public:
    // Single-leaf tree (x0) so that a default-constructed tree is still valid.
    GpTree() : nodes_{Node::feature_ref(0)}, depth_(1), required_dimension_(1) {}

    explicit GpTree(std::vector<Node> prefix) : nodes_(std::move(prefix))
    {
        if (nodes_.empty()) {
            throw StructuralError("GP tree must contain at least one node");
        }
        // Reverse scan with a depth stack checks arity completeness and
        // computes depth in one pass.
        std::vector<int> stack;
        stack.reserve(nodes_.size());
        std::uint32_t max_feature = 0;
        bool has_feature = false;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            int const k = arity(it->kind);
            if (static_cast<int>(stack.size()) < k) {
                throw StructuralError("GP tree prefix is missing operands");
            }
            int d = 0;
            for (int c = 0; c < k; ++c) {
                d = std::max(d, stack.back());
                stack.pop_back();
            }
            stack.push_back(d + 1);
            if (it->kind == NodeKind::FeatureRef) {
                has_feature = true;
                max_feature = std::max(max_feature, it->feature);
            }
        }
        if (stack.size() != 1) {
            throw StructuralError("GP tree prefix has dangling operands");
        }
        depth_ = stack.back();
        required_dimension_ = has_feature ? static_cast<std::size_t>(max_feature) + 1 : 0;
    }

    static GpTree leaf(Node n) { return GpTree(std::vector<Node>{n}); }

    // Builds an internal node over already-built child trees.
    static GpTree make(NodeKind kind, std::span<const GpTree> children)
    {
        if (static_cast<int>(children.size()) != arity(kind)) {
            throw StructuralError("wrong number of children for node kind");
        }
        std::vector<Node> prefix{Node::op(kind)};
        for (const GpTree& c : children) {
            prefix.insert(prefix.end(), c.nodes_.begin(), c.nodes_.end());
        }
        return GpTree(std::move(prefix));
    }
    static GpTree make(NodeKind kind, const GpTree& child)
    {
        return make(kind, std::span<const GpTree>(&child, 1));
    }
    static GpTree make(NodeKind kind, const GpTree& lhs, const GpTree& rhs)
    {
        GpTree const children[] = {lhs, rhs};
        return make(kind, std::span<const GpTree>(children));
    }

    [[nodiscard]] std::span<const Node> nodes() const noexcept { return nodes_; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] int depth() const noexcept { return depth_; }
    // Smallest feature-vector length this tree can be evaluated on.
    [[nodiscard]] std::size_t required_dimension() const noexcept { return required_dimension_; }

    [[nodiscard]] std::size_t subtree_end(std::size_t root) const noexcept
    {
        std::size_t open = 1;
        std::size_t i = root;
        while (open > 0) {
            open += static_cast<std::size_t>(arity(nodes_[i].kind));
            --open;
            ++i;
        }
        return i;
    }

    [[nodiscard]] GpTree subtree(std::size_t root) const
    {
        return GpTree(std::vector<Node>(nodes_.begin() + static_cast<std::ptrdiff_t>(root),
                                        nodes_.begin() + static_cast<std::ptrdiff_t>(subtree_end(root))));
    }

    // Copy of this tree with the subtree at `root` swapped for `replacement`.
    [[nodiscard]] GpTree replace_subtree(std::size_t root, const GpTree& replacement) const
    {
        std::size_t const end = subtree_end(root);
        std::vector<Node> out;
        out.reserve(nodes_.size() - (end - root) + replacement.size());
        out.insert(out.end(), nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(root));
        out.insert(out.end(), replacement.nodes_.begin(), replacement.nodes_.end());
        out.insert(out.end(), nodes_.begin() + static_cast<std::ptrdiff_t>(end), nodes_.end());
        return GpTree(std::move(out));
    }

    friend bool operator==(const GpTree& a, const GpTree& b) noexcept { return a.nodes_ == b.nodes_; }

private:
    std::vector<Node> nodes_;
    int depth_ = 1;
    std::size_t required_dimension_ = 0;
};

// Raw arithmetic value of the tree on x. Throws StructuralError when the tree
// references a feature beyond x.
inline double evaluate_raw(const GpTree& tree, std::span<const double> x)
{
    if (tree.required_dimension() > x.size()) {
        throw StructuralError("tree references feature x" + std::to_string(tree.required_dimension() - 1) +
                              " but input has dimension " + std::to_string(x.size()));
    }
    auto const nodes = tree.nodes();
    // Depth bounds the stack only for balanced shapes; size is the safe bound.
    thread_local std::vector<double> stack;
    stack.clear();
    stack.reserve(nodes.size());
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        switch (it->kind) {
        case NodeKind::FeatureRef:
            stack.push_back(x[it->feature]);
            break;
        case NodeKind::Constant:
            stack.push_back(it->value);
            break;
        case NodeKind::UnaryMinus:
            stack.back() = -stack.back();
            break;
        default: {
            // first child sits on top of the stack
            double const a = stack.back();
            stack.pop_back();
            double const b = stack.back();
            double r = 0.0;
            switch (it->kind) {
            case NodeKind::Add:
                r = a + b;
                break;
            case NodeKind::Subtract:
                r = a - b;
                break;
            case NodeKind::Multiply:
                r = a * b;
                break;
            default:
                r = analytic_quotient(a, b);
                break;
            }
            stack.back() = r;
            break;
        }
        }
    }
    return stack.back();
}

// Tree response y = f(x). Non-finite results (overflow) are clamped to
// +/-sentinel, NaN to +sentinel, so threshold search stays total.
inline double evaluate_tree(const GpTree& tree, std::span<const double> x,
                            double sentinel = kDefaultResponseSentinel)
{
    double const y = evaluate_raw(tree, x);
    if (std::isfinite(y)) {
        return y;
    }
    if (std::isnan(y)) {
        return sentinel;
    }
    return y > 0 ? sentinel : -sentinel;
}

// ---------------------------------------------------------------------------
// Random generation and variation

enum class GrowMode { Full, Grow };

struct TreeGenConfig {
    std::size_t feature_count = 3;
    bool use_constants = true;
    double constant_min = -1.0;
    double constant_max = 1.0;
};

namespace detail {

inline constexpr NodeKind kFunctionSet[] = {NodeKind::UnaryMinus, NodeKind::Add, NodeKind::Subtract,
                                            NodeKind::Multiply, NodeKind::AnalyticQuotient};

inline Node random_terminal(const TreeGenConfig& cfg, Rng& rng)
{
    std::size_t const n = cfg.feature_count + (cfg.use_constants ? 1 : 0);
    std::size_t const pick = uniform_index(rng, n);
    if (pick < cfg.feature_count) {
        return Node::feature_ref(static_cast<std::uint32_t>(pick));
    }
    return Node::constant(std::uniform_real_distribution<double>(cfg.constant_min, cfg.constant_max)(rng));
}

inline void generate_into(std::vector<Node>& out, int depth_left, GrowMode mode, const TreeGenConfig& cfg,
                          Rng& rng)
{
    if (depth_left <= 1) {
        out.push_back(random_terminal(cfg, rng));
        return;
    }
    std::size_t constexpr n_functions = std::size(kFunctionSet);
    bool function = true;
    if (mode == GrowMode::Grow) {
        // Koza grow: pick uniformly from the union of function and terminal sets.
        std::size_t const n_terminals = cfg.feature_count + (cfg.use_constants ? 1 : 0);
        function = uniform_index(rng, n_functions + n_terminals) < n_functions;
    }
    if (!function) {
        out.push_back(random_terminal(cfg, rng));
        return;
    }
    NodeKind const kind = kFunctionSet[uniform_index(rng, n_functions)];
    out.push_back(Node::op(kind));
    for (int c = 0; c < arity(kind); ++c) {
        generate_into(out, depth_left - 1, mode, cfg, rng);
    }
}

} // namespace detail

// Full mode puts every leaf at exactly max_depth; grow mode may stop early.
inline GpTree generate_tree(int max_depth, GrowMode mode, const TreeGenConfig& cfg, Rng& rng)
{
    if (max_depth < 1) {
        throw ConfigError("generate_tree: max_depth must be >= 1");
    }
    if (cfg.feature_count == 0 && !cfg.use_constants) {
        throw ConfigError("generate_tree: empty terminal set");
    }
    std::vector<Node> prefix;
    detail::generate_into(prefix, max_depth, mode, cfg, rng);
    return GpTree(std::move(prefix));
}

// Ramped half-and-half: the first size/2 trees are full, the rest grow, with
// depths cycling through 2..max_depth within each half.
inline std::vector<GpTree> init_population(std::size_t size, int max_depth, const TreeGenConfig& cfg, Rng& rng)
{
    if (size < 2) {
        throw ConfigError("init_population: size must be >= 2");
    }
    if (max_depth < 1) {
        throw ConfigError("init_population: max_depth must be >= 1");
    }
    int const lo = std::min(2, max_depth);
    int const span = max_depth - lo + 1;
    std::size_t const n_full = size / 2;
    std::vector<GpTree> population;
    population.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        bool const full = i < n_full;
        std::size_t const k = full ? i : i - n_full;
        int const depth = lo + static_cast<int>(k % static_cast<std::size_t>(span));
        population.push_back(generate_tree(depth, full ? GrowMode::Full : GrowMode::Grow, cfg, rng));
    }
    return population;
}

// Offspring = parent_a with its subtree at point_a replaced by parent_b's
// subtree at point_b.
inline GpTree point_crossover_at(const GpTree& parent_a, std::size_t point_a, const GpTree& parent_b,
                                 std::size_t point_b)
{
    return parent_a.replace_subtree(point_a, parent_b.subtree(point_b));
}

inline GpTree point_crossover(const GpTree& parent_a, const GpTree& parent_b, Rng& rng)
{
    std::size_t const pa = uniform_index(rng, parent_a.size());
    std::size_t const pb = uniform_index(rng, parent_b.size());
    return point_crossover_at(parent_a, pa, parent_b, pb);
}

inline GpTree point_mutation_at(const GpTree& parent, std::size_t point, int subtree_max_depth,
                                const TreeGenConfig& cfg, Rng& rng)
{
    if (subtree_max_depth < 1) {
        throw ConfigError("point_mutation: subtree_max_depth must be >= 1");
    }
    return parent.replace_subtree(point, generate_tree(subtree_max_depth, GrowMode::Grow, cfg, rng));
}

inline GpTree point_mutation(const GpTree& parent, int subtree_max_depth, const TreeGenConfig& cfg, Rng& rng)
{
    std::size_t const point = uniform_index(rng, parent.size());
    return point_mutation_at(parent, point, subtree_max_depth, cfg, rng);
}

// ---------------------------------------------------------------------------
// Prefix text form, e.g. "(* (+ x0 x2) x1)". Constants use the shortest
// representation that parses back to the same double.

inline std::string_view operator_symbol(NodeKind kind) noexcept
{
    switch (kind) {
    case NodeKind::UnaryMinus:
        return "neg";
    case NodeKind::Add:
        return "+";
    case NodeKind::Subtract:
        return "-";
    case NodeKind::Multiply:
        return "*";
    case NodeKind::AnalyticQuotient:
        return "aq";
    default:
        return "";
    }
}

inline std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(std::begin(buf), std::end(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string to_prefix(const GpTree& tree)
{
    std::string out;
    auto const nodes = tree.nodes();
    // pending[k] = operands still owed to the k-th open operator
    std::vector<int> pending;
    for (const Node& n : nodes) {
        if (!pending.empty()) {
            out += ' ';
        }
        if (is_terminal(n.kind)) {
            if (n.kind == NodeKind::FeatureRef) {
                out += 'x';
                out += std::to_string(n.feature);
            } else {
                out += format_double(n.value);
            }
            while (!pending.empty()) {
                if (--pending.back() > 0) {
                    break;
                }
                pending.pop_back();
                out += ')';
            }
        } else {
            out += '(';
            out += operator_symbol(n.kind);
            pending.push_back(arity(n.kind));
        }
    }
    return out;
}

namespace detail {

class PrefixParser {
public:
    explicit PrefixParser(std::string_view text) : text_(text) {}

    std::vector<Node> parse()
    {
        parse_expr();
        skip_ws();
        if (pos_ != text_.size()) {
            fail("trailing characters");
        }
        return std::move(out_);
    }

private:
    [[noreturn]] void fail(const std::string& what) const
    {
        throw DataError("prefix tree parse error at offset " + std::to_string(pos_) + ": " + what);
    }

    void skip_ws()
    {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
                                       text_[pos_] == '\r')) {
            ++pos_;
        }
    }

    std::string_view token()
    {
        skip_ws();
        std::size_t const start = pos_;
        while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != '(' && text_[pos_] != ')' &&
               text_[pos_] != '\t' && text_[pos_] != '\n' && text_[pos_] != '\r') {
            ++pos_;
        }
        if (start == pos_) {
            fail("expected token");
        }
        return text_.substr(start, pos_ - start);
    }

    void parse_expr()
    {
        skip_ws();
        if (pos_ >= text_.size()) {
            fail("unexpected end of input");
        }
        if (text_[pos_] == '(') {
            ++pos_;
            std::string_view const op = token();
            NodeKind kind{};
            if (op == "neg") {
                kind = NodeKind::UnaryMinus;
            } else if (op == "+") {
                kind = NodeKind::Add;
            } else if (op == "-") {
                kind = NodeKind::Subtract;
            } else if (op == "*") {
                kind = NodeKind::Multiply;
            } else if (op == "aq") {
                kind = NodeKind::AnalyticQuotient;
            } else {
                fail("unknown operator '" + std::string(op) + "'");
            }
            out_.push_back(Node::op(kind));
            for (int c = 0; c < arity(kind); ++c) {
                parse_expr();
            }
            skip_ws();
            if (pos_ >= text_.size() || text_[pos_] != ')') {
                fail("expected ')'");
            }
            ++pos_;
            return;
        }
        std::string_view const tok = token();
        if (tok.size() > 1 && tok[0] == 'x') {
            std::uint32_t index = 0;
            auto [p, ec] = std::from_chars(tok.data() + 1, tok.data() + tok.size(), index);
            if (ec != std::errc{} || p != tok.data() + tok.size()) {
                fail("bad feature reference '" + std::string(tok) + "'");
            }
            out_.push_back(Node::feature_ref(index));
            return;
        }
        double v = 0.0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || p != tok.data() + tok.size()) {
            fail("bad constant '" + std::string(tok) + "'");
        }
        out_.push_back(Node::constant(v));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::vector<Node> out_;
};

} // namespace detail

inline GpTree parse_prefix(std::string_view text)
{
    return GpTree(detail::PrefixParser(text).parse());
}

} // namespace mogphmm
