#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "betula/cluster_features.hpp"
#include "betula/metrics.hpp"
#include "betula/serialization.hpp"

namespace betula {

struct TreeConfig {
    int branching_factor = 7;         // max children per inner node
    int leaf_capacity = 7;            // max features per leaf
    std::size_t max_leaf_entries = 5000;  // global cap; exceeding it triggers a rebuild
    DistanceKind distance = DistanceKind::D4;
    AbsorptionKind absorption = AbsorptionKind::Radius;
    double initial_threshold = 0.0;
    bool single_precision = false;    // round every stored feature field to float after updates

    void validate() const {
        if (branching_factor < 2) throw std::invalid_argument("TreeConfig: branching_factor must be >= 2");
        if (leaf_capacity < 1) throw std::invalid_argument("TreeConfig: leaf_capacity must be >= 1");
        if (max_leaf_entries < 1) throw std::invalid_argument("TreeConfig: max_leaf_entries must be >= 1");
        if (!(initial_threshold >= 0.0)) throw std::invalid_argument("TreeConfig: initial_threshold must be >= 0");
    }
};

struct TreeStats {
    std::size_t height = 0;
    std::size_t node_count = 0;
    std::size_t leaf_entries = 0;
    std::size_t rebuilds = 0;
    double threshold = 0.0;
    std::uint64_t cancellation_flags = 0;
};

/// Depth-balanced tree of clustering features. Points descend from the root
/// by nearest child aggregate, merge into the best leaf entry when the
/// absorption criterion stays within the threshold, and otherwise start a
/// new entry; overfull nodes split and the split can propagate to the root.
/// When the global leaf-entry cap is exceeded the tree is rebuilt from its
/// leaf features with a raised threshold until it fits.
///
/// Feature is BirchFeature or BetulaFeature; the metric calls dispatch to
/// the matching algebraic form, so instability (or stability) of the form
/// shows up in the construction itself.
template <class Feature>
class CfTree {
    static_assert(std::is_same_v<Feature, BirchFeature> || std::is_same_v<Feature, BetulaFeature>);

public:
    CfTree(std::size_t dim, TreeConfig config) : dim_(dim), config_(config), threshold_(config.initial_threshold) {
        if (dim == 0) throw std::invalid_argument("CfTree: dimensionality must be positive");
        config_.validate();
        root_ = std::make_unique<Node>();
    }

    std::size_t dim() const { return dim_; }
    const TreeConfig& config() const { return config_; }
    double threshold() const { return threshold_; }
    std::size_t leaf_entry_count() const { return leaf_entries_; }
    std::size_t rebuild_count() const { return rebuilds_; }
    std::uint64_t cancellation_flags() const { return flags_; }

    void insert(std::span<const double> x, double w = 1.0) {
        if (x.size() != dim_) throw std::invalid_argument("CfTree::insert: dimensionality mismatch");
        insert_feature(lift(x, w));
    }

    void insert_feature(Feature f) {
        if (feature_dim(f) != dim_) throw std::invalid_argument("CfTree::insert_feature: dimensionality mismatch");
        if (config_.single_precision) f.round_to_single();
        insert_no_rebuild(std::move(f));
        if (leaf_entries_ > config_.max_leaf_entries) rebuild();
    }

    // Rebuild passes with increasing threshold until the cap holds.
    void rebuild() {
        while (leaf_entries_ > config_.max_leaf_entries) {
            const double next = next_threshold();
            std::vector<Feature> features = leaf_features();
            root_ = std::make_unique<Node>();
            leaf_entries_ = 0;
            threshold_ = next;
            ++rebuilds_;
            for (Feature& f : features) insert_no_rebuild(std::move(f));
        }
    }

    // Flat left-to-right list of leaf entries.
    std::vector<Feature> leaf_features() const {
        std::vector<Feature> out;
        out.reserve(leaf_entries_);
        collect(root_.get(), out);
        return out;
    }

    Feature root_aggregate() const { return root_->aggregate; }

    double total_weight() const { return weight_of(root_->aggregate); }

    TreeStats stats() const {
        TreeStats s;
        s.height = height(root_.get());
        s.node_count = count_nodes(root_.get());
        s.leaf_entries = leaf_entries_;
        s.rebuilds = rebuilds_;
        s.threshold = threshold_;
        s.cancellation_flags = flags_;
        return s;
    }

    // Indented text dump, one node per line: `I <aggregate>` for inner
    // nodes, `L <entry> <entry> ...` for leaves. Driven by golden tests,
    // so the format is byte-stable for a given tree.
    std::string dump() const {
        std::string out;
        dump_node(root_.get(), 0, out);
        return out;
    }

    struct NodeView {
        int depth = 0;
        bool leaf = true;
        const Feature* aggregate = nullptr;
        std::span<const Feature> entries;
        std::size_t child_count = 0;
    };

    // Depth-first pre-order walk over the node structure.
    template <class Fn>
    void visit(Fn&& fn) const {
        visit_impl(root_.get(), 0, fn);
    }

private:
    struct Node {
        bool leaf = true;
        Feature aggregate;
        std::vector<Feature> entries;                 // leaf payload
        std::vector<std::unique_ptr<Node>> children;  // inner payload
    };

    static std::size_t feature_dim(const Feature& f) { return f.dim(); }

    static double weight_of(const Feature& f) {
        if constexpr (std::is_same_v<Feature, BirchFeature>)
            return static_cast<double>(f.count);
        else
            return f.weight;
    }

    Feature lift(std::span<const double> x, double w) const {
        if constexpr (std::is_same_v<Feature, BirchFeature>) {
            if (!(w > 0.0) || std::floor(w) != w)
                throw std::invalid_argument("CfTree::insert: classic features take positive integer weights");
            return BirchFeature::from_point(x, static_cast<std::int64_t>(w));
        } else {
            return BetulaFeature::from_point(x, w);
        }
    }

    double dist(const Feature& a, const Feature& b) {
        const MetricValue v = distance(config_.distance, a, b);
        if (v.cancellation) ++flags_;
        return v.value;
    }

    double absorb_value(const Feature& entry, const Feature& incoming) {
        const MetricValue v = absorption(config_.absorption, entry, incoming);
        if (v.cancellation) ++flags_;
        return v.value;
    }

    void apply_rounding(Feature& f) const {
        if (config_.single_precision) f.round_to_single();
    }

    void insert_no_rebuild(Feature f) {
        if (root_->leaf && root_->entries.empty()) {
            root_->aggregate = f;
            root_->entries.push_back(std::move(f));
            leaf_entries_ = 1;
            return;
        }

        // Descend to the leaf whose aggregate is nearest; ties keep the
        // first (lowest-index) child, which makes insertion deterministic.
        std::vector<Node*> path;
        Node* node = root_.get();
        path.push_back(node);
        while (!node->leaf) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < node->children.size(); ++i) {
                const double d = dist(node->children[i]->aggregate, f);
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            node = node->children[best].get();
            path.push_back(node);
        }

        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < node->entries.size(); ++i) {
            const double d = dist(node->entries[i], f);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }

        if (absorb_value(node->entries[best], f) <= threshold_) {
            node->entries[best].add(f);
            apply_rounding(node->entries[best]);
            for (Node* p : path) {
                p->aggregate.add(f);
                apply_rounding(p->aggregate);
            }
            return;
        }

        node->entries.push_back(std::move(f));
        ++leaf_entries_;
        const Feature& added = node->entries.back();
        for (Node* p : path) {
            p->aggregate.add(added);
            apply_rounding(p->aggregate);
        }
        split_cascade(path);
    }

    bool over_capacity(const Node* n) const {
        return n->leaf ? n->entries.size() > static_cast<std::size_t>(config_.leaf_capacity)
                       : n->children.size() > static_cast<std::size_t>(config_.branching_factor);
    }

    void split_cascade(std::vector<Node*>& path) {
        for (std::size_t level = path.size(); level-- > 0;) {
            Node* n = path[level];
            if (!over_capacity(n)) break;
            auto [a, b] = split_node(n);
            if (level == 0) {
                auto new_root = std::make_unique<Node>();
                new_root->leaf = false;
                new_root->aggregate = merge(a->aggregate, b->aggregate);
                apply_rounding(new_root->aggregate);
                new_root->children.push_back(std::move(a));
                new_root->children.push_back(std::move(b));
                root_ = std::move(new_root);
                return;
            }
            Node* parent = path[level - 1];
            for (std::size_t i = 0; i < parent->children.size(); ++i) {
                if (parent->children[i].get() == n) {
                    parent->children[i] = std::move(a);
                    parent->children.insert(parent->children.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                                            std::move(b));
                    break;
                }
            }
        }
    }

    // Seeds are the two items farthest apart; everything else goes to the
    // nearer seed, ties to the first. Both halves end up nonempty.
    std::pair<std::unique_ptr<Node>, std::unique_ptr<Node>> split_node(Node* n) {
        const std::size_t m = n->leaf ? n->entries.size() : n->children.size();
        auto item_feature = [&](std::size_t i) -> const Feature& {
            return n->leaf ? n->entries[i] : n->children[i]->aggregate;
        };

        std::size_t seed_a = 0, seed_b = 1;
        double max_d = -1.0;
        for (std::size_t i = 0; i + 1 < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) {
                const double d = dist(item_feature(i), item_feature(j));
                if (d > max_d) {
                    max_d = d;
                    seed_a = i;
                    seed_b = j;
                }
            }
        }

        // Assign before moving anything; the distance calls need intact items.
        std::vector<bool> to_a(m);
        for (std::size_t i = 0; i < m; ++i) {
            if (i == seed_a)
                to_a[i] = true;
            else if (i == seed_b)
                to_a[i] = false;
            else
                to_a[i] = dist(item_feature(i), item_feature(seed_a)) <= dist(item_feature(i), item_feature(seed_b));
        }

        auto a = std::make_unique<Node>();
        auto b = std::make_unique<Node>();
        a->leaf = b->leaf = n->leaf;
        for (std::size_t i = 0; i < m; ++i) {
            Node* target = to_a[i] ? a.get() : b.get();
            target->aggregate.add(item_feature(i));
            if (n->leaf)
                target->entries.push_back(std::move(n->entries[i]));
            else
                target->children.push_back(std::move(n->children[i]));
        }
        apply_rounding(a->aggregate);
        apply_rounding(b->aggregate);
        return {std::move(a), std::move(b)};
    }

    // Raised threshold for the next rebuild pass: the mean over leaves of
    // the smallest pairwise absorption value inside each leaf (aiming to
    // merge roughly the closest pair per leaf), floored by doubling and by
    // the next representable value so the threshold strictly increases and
    // the rebuild loop terminates on any input.
    double next_threshold() {
        double sum = 0.0;
        std::size_t leaves_with_pairs = 0;
        for_each_leaf(root_.get(), [&](const Node* leaf) {
            const std::vector<Feature>& es = leaf->entries;
            if (es.size() < 2) return;
            double min_pair = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i + 1 < es.size(); ++i)
                for (std::size_t j = i + 1; j < es.size(); ++j)
                    min_pair = std::min(min_pair, absorb_value(es[i], es[j]));
            sum += min_pair;
            ++leaves_with_pairs;
        });
        double candidate = leaves_with_pairs ? sum / static_cast<double>(leaves_with_pairs) : 0.0;
        candidate = std::max(candidate, threshold_ * 2.0);
        candidate = std::max(candidate, std::nextafter(threshold_, std::numeric_limits<double>::infinity()));
        return candidate;
    }

    template <class Fn>
    static void for_each_leaf(const Node* n, Fn&& fn) {
        if (n->leaf) {
            fn(n);
            return;
        }
        for (const auto& c : n->children) for_each_leaf(c.get(), fn);
    }

    static void collect(const Node* n, std::vector<Feature>& out) {
        if (n->leaf) {
            out.insert(out.end(), n->entries.begin(), n->entries.end());
            return;
        }
        for (const auto& c : n->children) collect(c.get(), out);
    }

    static std::size_t height(const Node* n) {
        return n->leaf ? 1 : 1 + height(n->children.front().get());
    }

    static std::size_t count_nodes(const Node* n) {
        if (n->leaf) return 1;
        std::size_t total = 1;
        for (const auto& c : n->children) total += count_nodes(c.get());
        return total;
    }

    template <class Fn>
    static void visit_impl(const Node* n, int depth, Fn& fn) {
        NodeView view;
        view.depth = depth;
        view.leaf = n->leaf;
        view.aggregate = &n->aggregate;
        view.entries = n->entries;
        view.child_count = n->children.size();
        fn(view);
        for (const auto& c : n->children) visit_impl(c.get(), depth + 1, fn);
    }

    static void dump_node(const Node* n, int depth, std::string& out) {
        out.append(static_cast<std::size_t>(depth) * 2, ' ');
        if (n->leaf) {
            out += 'L';
            for (const Feature& e : n->entries) {
                out += ' ';
                out += to_text(e);
            }
            out += '\n';
            return;
        }
        out += "I ";
        out += to_text(n->aggregate);
        out += '\n';
        for (const auto& c : n->children) dump_node(c.get(), depth + 1, out);
    }

    std::size_t dim_;
    TreeConfig config_;
    double threshold_;
    std::unique_ptr<Node> root_;
    std::size_t leaf_entries_ = 0;
    std::size_t rebuilds_ = 0;
    std::uint64_t flags_ = 0;
};

using BirchTree = CfTree<BirchFeature>;
using BetulaTree = CfTree<BetulaFeature>;

}  // namespace betula
