#ifndef DSCS_SKIPLIST_HPP
#define DSCS_SKIPLIST_HPP

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "dscs/codec.hpp"
#include "dscs/crypto/digest.hpp"

// Rank-based authenticated skip list.
//
// Structure. Every element owns a tower of nodes at levels 0..L, where L is
// derived from the element digest so that client and server agree on it.
// A sentinel head tower on the left reaches the highest element level; its
// top node is the root. right(z) is kept only when the right neighbour is the
// top node of its tower, so every node is reachable along exactly one path
// and the nodes form a tree:
//
//     rank(z)  = rank(down) + rank(right)        (+1 for element bottom nodes)
//     label(z) = h(level || rank || x(z) || label(right))        level 0
//     label(z) = h(level || rank || label(down) || label(right)) level > 0
//
// with absent nodes contributing rank 0 and the all-zero label, and x(z) the
// digest of the stored element (all zeros for the sentinel).
//
// Positions are 1..m for elements and 0 for the sentinel.

namespace dscs::skiplist {

inline constexpr unsigned kLevelCap = 32;

enum class UpdateType : std::uint8_t { Insert = 1, Modify = 2, Delete = 3 };

inline const char* to_string(UpdateType t) {
    switch (t) {
    case UpdateType::Insert: return "insert";
    case UpdateType::Modify: return "modify";
    case UpdateType::Delete: return "delete";
    }
    return "?";
}

/// Level of a freshly inserted element: trailing zero bits of its digest, capped.
inline unsigned level_of(const Digest& element_digest) {
    unsigned tz = 0;
    for (std::size_t k = element_digest.size(); k-- > 0;) {
        std::uint8_t b = element_digest[k];
        if (b == 0) {
            tz += 8;
            if (tz >= kLevelCap) return kLevelCap;
            continue;
        }
        while (!(b & 1)) {
            ++tz;
            b >>= 1;
        }
        break;
    }
    return std::min(tz, kLevelCap);
}

inline unsigned element_level(ByteView element) { return level_of(digest(element)); }

inline Digest node_label(unsigned level, std::uint64_t rank, const Digest& first, const Digest& right) {
    return Hasher().update_u8(static_cast<std::uint8_t>(level)).update_u64(rank).update(first).update(right).finish();
}

/// One step of a verification path, bottom to root. `label`/`rank` describe
/// the child of this node that is NOT on the path (or the element for a
/// bottom node entered from the right). direction 0: the previous path node
/// is down(z) (or z is the first entry); 1: the previous node is right(z).
///
/// Nodes entered from below whose right child is absent carry no information
/// and are left out; the verifier re-inserts them from gaps in `level`.
struct ProofEntry {
    std::uint8_t level = 0;
    std::uint64_t rank = 0;
    std::uint8_t direction = 0;
    Digest label{};

    bool operator==(const ProofEntry&) const = default;
};

struct Proof {
    std::vector<ProofEntry> entries;

    bool operator==(const Proof&) const = default;

    // count(4B) || {level(1B), rank(8B), direction(1B), label(32B)}*
    void write(ByteWriter& w) const {
        w.u32(static_cast<std::uint32_t>(entries.size()));
        for (const auto& e : entries) w.u8(e.level).u64(e.rank).u8(e.direction).raw(view(e.label));
    }

    static Proof read(ByteReader& r) {
        Proof p;
        auto count = r.u32();
        if (count > r.remaining() / 42) fail(ErrorCode::Malformed, "proof count exceeds payload");
        p.entries.resize(count);
        for (auto& e : p.entries) {
            e.level = r.u8();
            e.rank = r.u64();
            e.direction = r.u8();
            auto lbl = r.raw(kDigestSize);
            std::copy(lbl.begin(), lbl.end(), e.label.begin());
        }
        return p;
    }

    Bytes encode() const {
        ByteWriter w;
        write(w);
        return w.take();
    }

    static Proof decode(ByteView b) {
        ByteReader r(b);
        auto p = read(r);
        r.expect_done();
        return p;
    }
};

/// Client-held commitment: root label and element count.
struct Metadata {
    Digest root{};
    std::uint64_t count = 0;

    bool operator==(const Metadata&) const = default;
};

struct Node {
    std::uint8_t level = 0;
    std::uint64_t rank = 0;
    Digest label{};
    // Known only through (rank, label): a subtree the holder never saw.
    bool opaque = false;
    bool sentinel = false;
    Digest element_digest{};
    std::optional<Bytes> element;
    std::unique_ptr<Node> right;
    std::unique_ptr<Node> down;

    std::uint64_t own_count() const { return level == 0 && !sentinel ? 1 : 0; }

    static std::unique_ptr<Node> make_opaque(unsigned level, std::uint64_t rank, const Digest& label) {
        if (rank == 0 && label == kZeroDigest) return nullptr;
        auto n = std::make_unique<Node>();
        n->level = static_cast<std::uint8_t>(level);
        n->rank = rank;
        n->label = label;
        n->opaque = true;
        return n;
    }
};

inline std::uint64_t rank_of(const Node* n) { return n ? n->rank : 0; }
inline const Digest& label_of(const Node* n) { return n ? n->label : kZeroDigest; }

inline void recompute(Node& z) {
    if (z.opaque) return;
    if (z.level == 0) {
        z.rank = z.own_count() + rank_of(z.right.get());
        z.label = node_label(0, z.rank, z.sentinel ? kZeroDigest : z.element_digest, label_of(z.right.get()));
    } else {
        z.rank = rank_of(z.down.get()) + rank_of(z.right.get());
        z.label = node_label(z.level, z.rank, label_of(z.down.get()), label_of(z.right.get()));
    }
}

struct ReadResult {
    Digest root;
    std::uint64_t rank = 0;
    std::uint64_t position = 0;
};

/// Rebuilds (root label, root rank, position) from a proof for the given
/// bottom node. nullopt for structurally invalid proofs.
inline std::optional<ReadResult> evaluate_proof(const Proof& proof, const std::optional<Digest>& element_digest) {
    if (proof.entries.empty()) return std::nullopt;
    const auto& first = proof.entries.front();
    if (first.level != 0 || first.direction != 0) return std::nullopt;

    std::uint64_t own = element_digest ? 1 : 0;
    std::uint64_t rank = own + first.rank;
    if (rank < first.rank) return std::nullopt;
    Digest label = node_label(0, rank, element_digest ? *element_digest : kZeroDigest, first.label);
    std::uint64_t position = own;
    unsigned level = 0;

    for (std::size_t k = 1; k < proof.entries.size(); ++k) {
        const auto& e = proof.entries[k];
        if (e.level > kLevelCap || e.direction > 1) return std::nullopt;
        // Implied nodes: entered from below, no right child.
        unsigned implied_top = e.direction == 0 ? e.level : e.level + 1u;
        if (e.direction == 0 && e.level <= level) return std::nullopt;
        if (e.direction == 1 && e.level < level) return std::nullopt;
        for (unsigned l = level + 1; l < implied_top; ++l) label = node_label(l, rank, label, kZeroDigest);
        level = e.level;

        std::uint64_t next = rank + e.rank;
        if (next < rank) return std::nullopt;
        rank = next;
        if (e.direction == 0) {
            if (e.rank == 0 && e.label == kZeroDigest) return std::nullopt;  // must have been omitted
            label = node_label(level, rank, label, e.label);
        } else {
            if (level == 0 && (e.rank > 1 || (e.rank == 0 && e.label != kZeroDigest))) return std::nullopt;
            label = node_label(level, rank, e.label, label);
            position += e.rank;
        }
    }
    return ReadResult{label, rank, position};
}

/// ListVerifyRead: element == nullopt verifies the sentinel (position 0).
inline bool verify_read(std::uint64_t index, const Metadata& md, const std::optional<Bytes>& element, const Proof& proof) {
    if ((index == 0) != !element.has_value()) return false;
    std::optional<Digest> d;
    if (element) d = digest(*element);
    auto r = evaluate_proof(proof, d);
    return r && r->root == md.root && r->rank == md.count && r->position == index;
}

/// Tree of nodes with the update algorithms shared by the server (full tree)
/// and the client (partial tree rebuilt from proofs).
class Tree {
public:
    Tree() {
        root_ = std::make_unique<Node>();
        root_->sentinel = true;
        recompute(*root_);
    }

    explicit Tree(std::unique_ptr<Node> root) : root_(std::move(root)) {}

    Tree(const Tree& o) : root_(clone(o.root_.get())) {}
    Tree& operator=(const Tree& o) {
        if (this != &o) root_ = clone(o.root_.get());
        return *this;
    }
    Tree(Tree&&) noexcept = default;
    Tree& operator=(Tree&&) noexcept = default;

    const Node* root() const { return root_.get(); }
    std::uint64_t size() const { return root_->rank; }
    unsigned height() const { return root_->level; }
    Metadata metadata() const { return {root_->label, root_->rank}; }

    struct Step {
        Node* node;
        bool went_right;  // meaningful for all but the last step
    };

    /// Root-to-bottom search path for position `target` (0 = sentinel).
    std::vector<Step> descend(std::uint64_t target) const {
        if (target > root_->rank) fail(ErrorCode::IndexOutOfRange, "position beyond list end");
        std::vector<Step> path;
        Node* z = root_.get();
        std::uint64_t offset = 0;
        for (;;) {
            if (!z || z->opaque) fail(ErrorCode::StaleProof, "path leaves the known part of the list");
            if (z->level == 0) {
                bool here = z->sentinel ? target == 0 : target == offset + 1;
                if (here) {
                    path.push_back({z, false});
                    return path;
                }
                offset += z->own_count();
                path.push_back({z, true});
                z = z->right.get();
                continue;
            }
            std::uint64_t down_rank = rank_of(z->down.get());
            if (target <= offset + down_rank) {
                path.push_back({z, false});
                z = z->down.get();
            } else {
                offset += down_rank;
                path.push_back({z, true});
                z = z->right.get();
            }
        }
    }

    Proof prove(std::uint64_t target) const {
        auto path = descend(target);
        Proof proof;
        const Node* bottom = path.back().node;
        proof.entries.push_back({0, rank_of(bottom->right.get()), 0, label_of(bottom->right.get())});
        for (std::size_t k = path.size() - 1; k-- > 0;) {
            const Node* z = path[k].node;
            if (!path[k].went_right) {
                if (!z->right) continue;
                proof.entries.push_back({z->level, z->right->rank, 0, z->right->label});
            } else if (z->level == 0) {
                proof.entries.push_back({0, z->own_count(), 1, z->sentinel ? kZeroDigest : z->element_digest});
            } else {
                proof.entries.push_back({z->level, rank_of(z->down.get()), 1, label_of(z->down.get())});
            }
        }
        return proof;
    }

    /// Element bytes at position i (server trees only).
    const Bytes& element_at(std::uint64_t i) const {
        if (i == 0) fail(ErrorCode::IndexOutOfRange, "position 0 is the sentinel");
        auto path = descend(i);
        const Node* b = path.back().node;
        if (!b->element) fail(ErrorCode::Internal, "element bytes not held");
        return *b->element;
    }

    /// New element becomes position i + 1. Level is explicit so partial
    /// trees (which may only know digests) follow the same rule.
    void insert_after(std::uint64_t i, const Digest& element_digest, std::optional<Bytes> element, unsigned level) {
        if (i > size()) fail(ErrorCode::IndexOutOfRange, "insert position beyond list end");
        level = std::min(level, kLevelCap);
        while (root_->level < level) {
            auto up = std::make_unique<Node>();
            up->level = static_cast<std::uint8_t>(root_->level + 1);
            up->down = std::move(root_);
            recompute(*up);
            root_ = std::move(up);
        }
        auto path = descend(i);
        auto pred = last_per_level(path, level);

        std::unordered_set<const Node*> dirty;
        for (auto& s : path) dirty.insert(s.node);

        std::unique_ptr<Node> tower;
        for (unsigned l = 0; l <= level; ++l) {
            auto n = std::make_unique<Node>();
            n->level = static_cast<std::uint8_t>(l);
            if (l == 0) {
                n->element_digest = element_digest;
                n->element = std::move(element);
            } else {
                n->down = std::move(tower);
            }
            n->right = std::move(pred[l]->right);
            dirty.insert(n.get());
            tower = std::move(n);
        }
        pred[level]->right = std::move(tower);
        refresh(root_.get(), dirty);
    }

    void modify(std::uint64_t i, const Digest& element_digest, std::optional<Bytes> element) {
        if (i == 0 || i > size()) fail(ErrorCode::IndexOutOfRange, "modify position out of range");
        auto path = descend(i);
        Node* b = path.back().node;
        b->element_digest = element_digest;
        b->element = std::move(element);
        std::unordered_set<const Node*> dirty;
        for (auto& s : path) dirty.insert(s.node);
        refresh(root_.get(), dirty);
    }

    void remove(std::uint64_t i) {
        if (i == 0 || i > size()) fail(ErrorCode::IndexOutOfRange, "delete position out of range");
        auto before = descend(i - 1);
        auto target = descend(i);

        // The doomed tower is the run of down-steps ending at the bottom node.
        std::size_t top = target.size() - 1;
        while (top > 0 && !target[top - 1].went_right) --top;
        // The node above the run entered the tower from the left; anything
        // above it belongs to other towers or to the head.
        unsigned level = target[top].node->level;
        auto pred = last_per_level(before, level);

        std::unordered_set<const Node*> dirty;
        for (auto& s : before) dirty.insert(s.node);
        for (std::size_t k = 0; k < top; ++k) dirty.insert(target[k].node);

        std::vector<std::unique_ptr<Node>> rights(level + 1);
        for (std::size_t k = top; k < target.size(); ++k) {
            Node* d = target[k].node;
            rights[d->level] = std::move(d->right);
        }
        for (unsigned l = 0; l < level; ++l) {
            if (pred[l]->right) fail(ErrorCode::StaleProof, "predecessor unexpectedly has a right child");
            pred[l]->right = std::move(rights[l]);
        }
        if (pred[level]->right.get() != target[top].node) fail(ErrorCode::StaleProof, "tower not linked from predecessor");
        pred[level]->right = std::move(rights[level]);  // frees the tower

        while (root_->level > 0 && !root_->right) {
            if (!root_->down || root_->down->opaque) fail(ErrorCode::StaleProof, "head tower unknown below root");
            auto d = std::move(root_->down);
            root_ = std::move(d);
        }
        refresh(root_.get(), dirty);
    }

    /// Partial tree for the verification path of one proof.
    static Tree from_proof(const Proof& proof, const std::optional<Digest>& element_digest) {
        if (proof.entries.empty()) fail(ErrorCode::StaleProof, "empty proof");
        auto cur = std::make_unique<Node>();
        cur->sentinel = !element_digest.has_value();
        if (element_digest) cur->element_digest = *element_digest;
        cur->right = Node::make_opaque(0, proof.entries[0].rank, proof.entries[0].label);
        recompute(*cur);
        for (std::size_t k = 1; k < proof.entries.size(); ++k) {
            const auto& e = proof.entries[k];
            unsigned implied_top = e.direction == 0 ? e.level : e.level + 1u;
            for (unsigned l = cur->level + 1u; l < implied_top; ++l) {
                auto up = std::make_unique<Node>();
                up->level = static_cast<std::uint8_t>(l);
                up->down = std::move(cur);
                recompute(*up);
                cur = std::move(up);
            }
            auto up = std::make_unique<Node>();
            up->level = e.level;
            if (e.direction == 0) {
                up->down = std::move(cur);
                up->right = Node::make_opaque(e.level, e.rank, e.label);
            } else {
                up->right = std::move(cur);
                if (e.level == 0) {
                    up->sentinel = e.rank == 0;
                    up->element_digest = e.label;
                } else {
                    up->down = Node::make_opaque(e.level - 1u, e.rank, e.label);
                }
            }
            recompute(*up);
            cur = std::move(up);
        }
        return Tree(std::move(cur));
    }

    /// Union of two partial trees over the same root.
    void merge(Tree&& other) {
        if (root_->label != other.root_->label) fail(ErrorCode::StaleProof, "proofs disagree on the root");
        merge_nodes(root_, std::move(other.root_));
    }

    void relabel_all() { relabel_all(root_.get()); }

private:
    static std::unique_ptr<Node> clone(const Node* z) {
        if (!z) return nullptr;
        auto c = std::make_unique<Node>();
        c->level = z->level;
        c->rank = z->rank;
        c->label = z->label;
        c->opaque = z->opaque;
        c->sentinel = z->sentinel;
        c->element_digest = z->element_digest;
        c->element = z->element;
        c->down = clone(z->down.get());
        c->right = clone(z->right.get());
        return c;
    }

    static std::vector<Node*> last_per_level(const std::vector<Step>& path, unsigned up_to) {
        std::vector<Node*> out(up_to + 1, nullptr);
        for (const auto& s : path)
            if (s.node->level <= up_to) out[s.node->level] = s.node;
        for (auto* p : out)
            if (!p) fail(ErrorCode::StaleProof, "search path misses a level");
        return out;
    }

    static void refresh(Node* z, const std::unordered_set<const Node*>& dirty) {
        if (!z || z->opaque || !dirty.count(z)) return;
        refresh(z->down.get(), dirty);
        refresh(z->right.get(), dirty);
        recompute(*z);
    }

    static void relabel_all(Node* z) {
        if (!z || z->opaque) return;
        relabel_all(z->down.get());
        relabel_all(z->right.get());
        recompute(*z);
    }

    static void merge_nodes(std::unique_ptr<Node>& mine, std::unique_ptr<Node>&& theirs) {
        if (!theirs) return;
        if (!mine) {
            mine = std::move(theirs);
            return;
        }
        if (mine->label != theirs->label || mine->level != theirs->level)
            fail(ErrorCode::StaleProof, "proofs disagree on a shared node");
        if (theirs->opaque) return;
        if (mine->opaque) {
            mine = std::move(theirs);
            return;
        }
        merge_nodes(mine->down, std::move(theirs->down));
        merge_nodes(mine->right, std::move(theirs->right));
    }

    std::unique_ptr<Node> root_;
};

/// Server-side skip list over stored elements (authentication tags).
class SkipList {
public:
    SkipList() = default;

    /// ListInit
    static SkipList build(const std::vector<Bytes>& elements) {
        SkipList s;
        // Append left to right; `last[l]` is the rightmost node at level l.
        auto root = std::make_unique<Node>();
        root->sentinel = true;
        std::vector<Node*> last{root.get()};
        for (const auto& el : elements) {
            Digest d = digest(el);
            unsigned level = level_of(d);
            while (root->level < level) {
                auto up = std::make_unique<Node>();
                up->level = static_cast<std::uint8_t>(root->level + 1);
                up->down = std::move(root);
                root = std::move(up);
                last.push_back(root.get());
            }
            std::unique_ptr<Node> tower;
            std::vector<Node*> made;
            for (unsigned l = 0; l <= level; ++l) {
                auto n = std::make_unique<Node>();
                n->level = static_cast<std::uint8_t>(l);
                if (l == 0) {
                    n->element_digest = d;
                    n->element = el;
                } else {
                    n->down = std::move(tower);
                }
                made.push_back(n.get());
                tower = std::move(n);
            }
            last[level]->right = std::move(tower);
            for (unsigned l = 0; l <= level; ++l) last[l] = made[l];
        }
        s.tree_ = Tree(std::move(root));
        s.tree_.relabel_all();
        return s;
    }

    Metadata metadata() const { return tree_.metadata(); }
    std::uint64_t size() const { return tree_.size(); }
    unsigned height() const { return tree_.height(); }
    const Tree& tree() const { return tree_; }

    const Bytes& element(std::uint64_t i) const { return tree_.element_at(i); }

    /// ListAuthRead (position 0 proves the sentinel).
    Proof prove(std::uint64_t i) const { return tree_.prove(i); }

    void insert_after(std::uint64_t i, const Bytes& element) {
        Digest d = digest(element);
        tree_.insert_after(i, d, element, level_of(d));
    }

    void modify(std::uint64_t i, const Bytes& element) { tree_.modify(i, digest(element), element); }

    void remove(std::uint64_t i) { tree_.remove(i); }

    /// ListPerformUpdate: apply and return the proof the client checks
    /// (inserted position, modified position, or the delete anchor i - 1).
    Proof perform_update(std::uint64_t i, UpdateType type, const std::optional<Bytes>& element) {
        switch (type) {
        case UpdateType::Insert:
            if (!element) fail(ErrorCode::Malformed, "insert needs an element");
            insert_after(i, *element);
            return prove(i + 1);
        case UpdateType::Modify:
            if (!element) fail(ErrorCode::Malformed, "modify needs an element");
            modify(i, *element);
            return prove(i);
        case UpdateType::Delete:
            remove(i);
            return prove(i - 1);
        }
        fail(ErrorCode::Malformed, "unknown update type");
    }

    // Preorder dump: level(1B) rank(8B) flags(1B) [element blob] label(32B), then down, then right.
    Bytes serialize() const {
        ByteWriter w;
        w.u32(1);  // format version
        write_node(w, tree_.root());
        return w.take();
    }

    static SkipList deserialize(ByteView bytes) {
        ByteReader r(bytes);
        if (r.u32() != 1) fail(ErrorCode::Malformed, "unknown skip list format");
        SkipList s;
        auto root = read_node(r, 0);
        r.expect_done();
        if (!root) fail(ErrorCode::Malformed, "empty skip list dump");
        s.tree_ = Tree(std::move(root));
        return s;
    }

private:
    enum Flags : std::uint8_t { kHasDown = 1, kHasRight = 2, kSentinel = 4 };

    static void write_node(ByteWriter& w, const Node* z) {
        std::uint8_t flags = (z->down ? kHasDown : 0) | (z->right ? kHasRight : 0) | (z->sentinel ? kSentinel : 0);
        w.u8(z->level).u64(z->rank).u8(flags);
        if (z->level == 0 && !z->sentinel) w.blob(*z->element);
        w.raw(view(z->label));
        if (z->down) write_node(w, z->down.get());
        if (z->right) write_node(w, z->right.get());
    }

    static std::unique_ptr<Node> read_node(ByteReader& r, unsigned depth) {
        if (depth > (1u << 20)) fail(ErrorCode::Malformed, "skip list dump too deep");
        auto z = std::make_unique<Node>();
        z->level = r.u8();
        std::uint64_t rank = r.u64();
        std::uint8_t flags = r.u8();
        z->sentinel = flags & kSentinel;
        if (z->level > kLevelCap) fail(ErrorCode::Malformed, "level above cap");
        if (z->sentinel && z->level != 0) fail(ErrorCode::Malformed, "sentinel above level 0");
        if (z->level == 0 && !z->sentinel) {
            z->element = r.blob();
            z->element_digest = digest(*z->element);
        }
        Digest stored{};
        auto lbl = r.raw(kDigestSize);
        std::copy(lbl.begin(), lbl.end(), stored.begin());
        if (flags & kHasDown) {
            if (z->level == 0) fail(ErrorCode::Malformed, "bottom node with down child");
            z->down = read_node(r, depth + 1);
        }
        if (flags & kHasRight) z->right = read_node(r, depth + 1);
        if ((z->down && z->down->level + 1 != z->level) || (z->right && z->right->level != z->level))
            fail(ErrorCode::Malformed, "inconsistent levels in dump");
        recompute(*z);
        if (z->rank != rank || z->label != stored) fail(ErrorCode::Malformed, "skip list dump fails label check");
        return z;
    }

    Tree tree_;
};

/// Client-side state of an in-flight update (ListInitUpdate output).
struct PendingUpdate {
    UpdateType type{};
    std::uint64_t index = 0;
    Metadata previous;
    Metadata expected;
    // What the server's post-update proof must authenticate.
    std::uint64_t confirm_index = 0;
    std::optional<Bytes> confirm_element;
};

/// A verified-on-arrival read response: element (nullopt = sentinel) + proof.
struct AnchorRead {
    std::uint64_t index = 0;
    std::optional<Bytes> element;
    Proof proof;
};

/// Positions the client must read before an update.
inline std::vector<std::uint64_t> update_anchors(UpdateType type, std::uint64_t i) {
    if (type == UpdateType::Delete) return {i - 1, i};
    return {i};
}

/// ListInitUpdate: verifies the anchor reads against `md` and predicts the
/// metadata after an honest update.
inline PendingUpdate init_update(std::uint64_t i, UpdateType type, const Metadata& md,
                                 const std::optional<Bytes>& new_element, std::span<const AnchorRead> reads) {
    switch (type) {
    case UpdateType::Insert:
        if (i > md.count) fail(ErrorCode::IndexOutOfRange, "insert position beyond list end");
        break;
    case UpdateType::Modify:
    case UpdateType::Delete:
        if (i == 0 || i > md.count) fail(ErrorCode::IndexOutOfRange, "position out of range");
        break;
    }
    if (type != UpdateType::Delete && !new_element) fail(ErrorCode::Malformed, "update needs a new element");

    auto need = update_anchors(type, i);
    std::optional<Tree> partial;
    const AnchorRead* delete_anchor = nullptr;
    for (auto pos : need) {
        auto it = std::find_if(reads.begin(), reads.end(), [&](const AnchorRead& r) { return r.index == pos; });
        if (it == reads.end()) fail(ErrorCode::StaleProof, "missing anchor read");
        if (!verify_read(pos, md, it->element, it->proof)) fail(ErrorCode::StaleProof, "anchor proof does not match metadata");
        std::optional<Digest> d;
        if (it->element) d = digest(*it->element);
        Tree t = Tree::from_proof(it->proof, d);
        if (!partial) partial.emplace(std::move(t));
        else partial->merge(std::move(t));
        if (type == UpdateType::Delete && pos == i - 1) delete_anchor = &*it;
    }

    PendingUpdate out;
    out.type = type;
    out.index = i;
    out.previous = md;
    switch (type) {
    case UpdateType::Insert: {
        Digest d = digest(*new_element);
        partial->insert_after(i, d, std::nullopt, level_of(d));
        out.confirm_index = i + 1;
        out.confirm_element = new_element;
        break;
    }
    case UpdateType::Modify:
        partial->modify(i, digest(*new_element), std::nullopt);
        out.confirm_index = i;
        out.confirm_element = new_element;
        break;
    case UpdateType::Delete:
        partial->remove(i);
        out.confirm_index = i - 1;
        out.confirm_element = delete_anchor->element;
        break;
    }
    out.expected = partial->metadata();
    return out;
}

/// ListVerifyUpdate: 1 iff the server's post-update proof reproduces the
/// predicted root. The caller commits `expected` on true and keeps
/// `previous` otherwise.
inline bool verify_update(const PendingUpdate& pending, const Proof& proof) {
    return verify_read(pending.confirm_index, pending.expected, pending.confirm_element, proof);
}

/// Full structural scan: ranks by brute-force recount, labels, levels,
/// sentinel/head shape. Returns an empty string when all invariants hold.
inline std::string check_invariants(const Tree& tree) {
    const Node* root = tree.root();
    // Root must be the head: its down chain ends at the sentinel.
    const Node* h = root;
    while (h->level > 0) {
        if (!h->down) return "head tower is broken";
        h = h->down.get();
    }
    if (!h->sentinel) return "root is not on the sentinel tower";
    if (root->level > 0 && !root->right) return "head taller than every element tower";

    std::uint64_t bad = 0;
    // Independent recount of reachable element bottom nodes.
    auto count = [&](auto&& self, const Node* z) -> std::uint64_t {
        if (!z) return 0;
        std::uint64_t c = (z->level == 0 && !z->sentinel ? 1 : 0) + self(self, z->down.get()) + self(self, z->right.get());
        if (c != z->rank) ++bad;
        if (z->opaque) ++bad;
        if (z->level == 0 && z->down) ++bad;
        if (z->down && z->down->level + 1 != z->level) ++bad;
        if (z->right && z->right->level != z->level) ++bad;
        if (z->sentinel && (z->level != 0 || z != h)) ++bad;
        Digest expect = z->level == 0
            ? node_label(0, z->rank, z->sentinel ? kZeroDigest : z->element_digest, label_of(z->right.get()))
            : node_label(z->level, z->rank, label_of(z->down.get()), label_of(z->right.get()));
        if (expect != z->label) ++bad;
        if (z->level == 0 && !z->sentinel && (!z->element || digest(*z->element) != z->element_digest)) ++bad;
        return c;
    };
    count(count, root);
    if (bad) return std::to_string(bad) + " node(s) violate rank/label/level invariants";
    return {};
}

} // namespace dscs::skiplist

#endif // DSCS_SKIPLIST_HPP
