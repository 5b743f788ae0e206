#ifndef DSCS_BENCH_HPP
#define DSCS_BENCH_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "dscs/dscs1.hpp"
#include "dscs/dscs2.hpp"
#include "dscs/service/behavior.hpp"
#include "dscs/wire.hpp"

// Desk-scale measurement harness: storage overhead, proof sizes, per-phase
// timings and Monte-Carlo detection rates. Runs against in-memory servers so
// every trial has its own isolated state.

namespace dscs::bench {

using wire::Protocol;
using skiplist::UpdateType;

/// p_detect = 1 - (1 - beta)^l.
inline double detection_probability(double beta, std::uint64_t l) {
    if (!(beta >= 0 && beta <= 1)) fail(ErrorCode::Usage, "beta must lie in [0, 1]");
    if (l < 1) fail(ErrorCode::Usage, "challenge size must be at least 1");
    return 1 - std::pow(1 - beta, static_cast<double>(l));
}

struct BenchConfig {
    Protocol protocol = Protocol::Dscs1;
    std::string profile = "test";
    std::size_t file_size = 64 * 1024;
    std::size_t block_size = 4096;  // n' in bytes
    std::uint64_t l = 10;
    double beta = 0;
    std::uint64_t trials = 20;  // audits per run
    std::uint64_t runs = 3;     // measured runs; one extra warm-up run is discarded
    std::uint64_t seed = 1;

    void validate() const {
        if (!(beta >= 0 && beta <= 1)) fail(ErrorCode::Usage, "beta must lie in [0, 1]");
        if (l < 1) fail(ErrorCode::Usage, "l must be at least 1");
        if (trials < 1 || runs < 1) fail(ErrorCode::Usage, "trials and runs must be positive");
        profile_by_name(profile);
    }
};

struct PhaseTiming {
    std::string phase;
    double median_ms = 0;
    double mean_ms = 0;
    std::size_t samples = 0;
};

struct BenchReport {
    BenchConfig config;
    std::uint64_t m = 0;
    std::size_t n = 0;
    std::size_t segment_bits = 0;
    double storage_overhead_pct = 0;
    double proof_bytes_mean = 0;
    std::size_t proof_bytes_min = 0;
    std::size_t proof_bytes_max = 0;
    double proof_bytes_excluding_block = 0;  // without the combined block y
    std::vector<PhaseTiming> timings;
    std::uint64_t audits = 0;
    double detection_rate = 0;
    double expected_detection = 0;
};

namespace detail {

using Clock = std::chrono::steady_clock;

template <class F>
double time_ms(F&& f) {
    auto t0 = Clock::now();
    f();
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

inline PhaseTiming summarize(std::string phase, std::vector<double> xs) {
    PhaseTiming t;
    t.phase = std::move(phase);
    t.samples = xs.size();
    if (xs.empty()) return t;
    std::sort(xs.begin(), xs.end());
    std::size_t h = xs.size() / 2;
    t.median_ms = xs.size() % 2 ? xs[h] : (xs[h - 1] + xs[h]) / 2;
    t.mean_ms = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    return t;
}

struct Samples {
    std::map<std::string, std::vector<double>> ms;
    std::vector<std::size_t> proof_bytes;
    std::vector<std::size_t> block_part;
    std::uint64_t detected = 0, audits = 0;
    double overhead = 0;
    std::uint64_t m = 0;
    std::size_t n = 0, segment_bits = 0;
};

inline std::size_t block_wire_bytes(const DataBlock& y) {
    ByteWriter w;
    put_block(w, y);
    return w.size();
}

inline void run_dscs1(const BenchConfig& cfg, const SecurityProfile& prof, Rng& rng, bool keep, Samples& out) {
    Bytes file = rng.bytes(cfg.file_size);
    auto layout = Layout::for_block_bytes(cfg.block_size, prof.segment_bytes());
    auto st = dscs1::keygen(prof, 1, layout.segments_per_block, rng);
    dscs1::ServerFile server;
    double t_out = time_ms([&] { server = dscs1::ServerFile::from_upload(dscs1::outsource(file, st, rng)); });
    const auto m = server.size();
    if (cfg.l > m) fail(ErrorCode::Usage, "l exceeds the number of blocks");

    std::size_t meta = 0;
    for (const auto& t : server.tags) meta += t.encode().size();
    for (const auto& h : server.pk.hs) meta += encode_int(h).size();
    meta += server.list.serialize().size();

    service::Behavior corrupt;
    corrupt.corrupt_fraction = cfg.beta;
    const Bytes fid = st.fid();
    Samples local;
    for (std::uint64_t t = 0; t < cfg.trials; ++t) {
        corrupt.seed = rng.below_u64(~0ull);
        dscs1::Challenge c;
        dscs1::StorageProof proof;
        bool ok = false;
        local.ms["challenge"].push_back(time_ms([&] { c = dscs1::challenge(st.pk, cfg.l, rng); }));
        local.ms["prove"].push_back(time_ms([&] {
            dscs1::check_challenge(c, server.size());
            proof = dscs1::prove_from(
                c, server.pk,
                [&](std::uint64_t i) {
                    const auto& v = server.blocks[i - 1];
                    return corrupt.corrupted(fid, i) ? service::Behavior::corrupt(v) : v;
                },
                [&](std::uint64_t i) -> const snc::RsaTag& { return server.tags[i - 1]; },
                [&](std::uint64_t i) { return server.list.prove(i); });
        }));
        local.ms["verify"].push_back(time_ms([&] { ok = dscs1::verify_audit(c, proof, st.pk); }));
        std::size_t total = proof.encode().size();
        local.proof_bytes.push_back(total);
        local.block_part.push_back(block_wire_bytes(proof.y));
        ++local.audits;
        if (!ok) ++local.detected;
    }
    for (std::uint64_t t = 0; t < std::min<std::uint64_t>(cfg.trials, 10); ++t) {
        std::uint64_t i = 1 + rng.below_u64(server.size());
        DataBlock v = layout.pack_block(rng.bytes(layout.block_bytes()));
        bool ok = false;
        local.ms["update"].push_back(time_ms([&] {
            std::vector<dscs1::ReadResponse> anchors;
            for (auto j : dscs1::update_anchors(UpdateType::Modify, i)) anchors.push_back(server.read(j, true));
            auto pending = dscs1::init_update(st, UpdateType::Modify, i, v, anchors, rng);
            ok = dscs1::verify_update(st, pending, server.perform_update(pending.request));
        }));
        if (!ok) fail(ErrorCode::Internal, "honest update rejected during bench");
    }
    if (!keep) return;
    local.ms["outsource"].push_back(t_out);
    for (auto& [k, v] : local.ms) out.ms[k].insert(out.ms[k].end(), v.begin(), v.end());
    out.proof_bytes.insert(out.proof_bytes.end(), local.proof_bytes.begin(), local.proof_bytes.end());
    out.block_part.insert(out.block_part.end(), local.block_part.begin(), local.block_part.end());
    out.detected += local.detected;
    out.audits += local.audits;
    out.overhead = 100.0 * static_cast<double>(meta) / static_cast<double>(std::max<std::size_t>(1, cfg.file_size));
    out.m = m;
    out.n = layout.segments_per_block;
    out.segment_bits = 8 * layout.segment_bytes;
}

inline void run_dscs2(const BenchConfig& cfg, const SecurityProfile& prof, Rng& rng, bool keep, Samples& out) {
    Bytes file = rng.bytes(cfg.file_size);
    const auto& suite = dscs2::suite_for(prof.curve_id);
    auto layout = Layout::for_block_bytes(cfg.block_size, dscs2::segment_bytes(suite));
    auto st = dscs2::keygen2(prof, 0, layout.segments_per_block, rng);
    dscs2::ServerFile server;
    double t_out = time_ms([&] { server = dscs2::ServerFile::from_upload(dscs2::outsource2(file, st)); });
    const auto m = server.size();
    if (cfg.l > m) fail(ErrorCode::Usage, "l exceeds the number of blocks");

    std::size_t meta = 0;
    for (const auto& t : server.tags) meta += dscs2::encode_tag(suite, t).size();

    service::Behavior corrupt;
    corrupt.corrupt_fraction = cfg.beta;
    const Bytes fid = st.pub.fid;
    Samples local;
    for (std::uint64_t t = 0; t < cfg.trials; ++t) {
        corrupt.seed = rng.below_u64(~0ull);
        dscs1::Challenge c;
        dscs2::StorageProof proof;
        bool ok = false;
        local.ms["challenge"].push_back(time_ms([&] { c = dscs2::challenge2(st.pub, cfg.l, rng); }));
        local.ms["prove"].push_back(time_ms([&] {
            dscs1::check_challenge(c, server.size());
            proof = dscs2::prove2_from(
                suite, c,
                [&](std::uint64_t i) {
                    const auto& v = server.blocks[i - 1];
                    return corrupt.corrupted(fid, i) ? service::Behavior::corrupt(v) : v;
                },
                [&](std::uint64_t i) -> const dscs2::G1& { return server.tags[i - 1]; });
        }));
        local.ms["verify"].push_back(time_ms([&] { ok = dscs2::verify_audit2(c, proof, st.pub); }));
        Bytes enc = proof.encode(suite);
        local.proof_bytes.push_back(enc.size());
        ByteWriter tag;
        tag.raw(dscs2::encode_tag(suite, proof.t));
        local.block_part.push_back(enc.size() - tag.size());
        ++local.audits;
        if (!ok) ++local.detected;
    }
    for (std::uint64_t t = 0; t < std::min<std::uint64_t>(cfg.trials, 10); ++t) {
        DataBlock v = layout.pack_block(rng.bytes(layout.block_bytes()));
        local.ms["update"].push_back(time_ms([&] { server.apply(dscs2::append(st, v)); }));
    }
    if (!keep) return;
    local.ms["outsource"].push_back(t_out);
    for (auto& [k, v] : local.ms) out.ms[k].insert(out.ms[k].end(), v.begin(), v.end());
    out.proof_bytes.insert(out.proof_bytes.end(), local.proof_bytes.begin(), local.proof_bytes.end());
    out.block_part.insert(out.block_part.end(), local.block_part.begin(), local.block_part.end());
    out.detected += local.detected;
    out.audits += local.audits;
    out.overhead = 100.0 * static_cast<double>(meta) / static_cast<double>(std::max<std::size_t>(1, cfg.file_size));
    out.m = m;
    out.n = layout.segments_per_block;
    out.segment_bits = 8 * layout.segment_bytes;
}

} // namespace detail

inline BenchReport run_bench(const BenchConfig& cfg) {
    cfg.validate();
    const auto prof = profile_by_name(cfg.profile);
    auto rng = Rng::deterministic(cfg.seed);
    detail::Samples s;
    for (std::uint64_t r = 0; r <= cfg.runs; ++r) {
        if (cfg.protocol == Protocol::Dscs1) {
            detail::run_dscs1(cfg, prof, rng, r > 0, s);
        } else {
            detail::run_dscs2(cfg, prof, rng, r > 0, s);
        }
    }
    BenchReport rep;
    rep.config = cfg;
    rep.m = s.m;
    rep.n = s.n;
    rep.segment_bits = s.segment_bits;
    rep.storage_overhead_pct = s.overhead;
    rep.audits = s.audits;
    rep.detection_rate = s.audits ? static_cast<double>(s.detected) / static_cast<double>(s.audits) : 0;
    rep.expected_detection = detection_probability(cfg.beta, cfg.l);
    auto mean = [](const std::vector<std::size_t>& v) {
        return v.empty() ? 0.0 : static_cast<double>(std::accumulate(v.begin(), v.end(), std::size_t{0})) / static_cast<double>(v.size());
    };
    rep.proof_bytes_mean = mean(s.proof_bytes);
    rep.proof_bytes_excluding_block = rep.proof_bytes_mean - mean(s.block_part);
    if (!s.proof_bytes.empty()) {
        rep.proof_bytes_min = *std::min_element(s.proof_bytes.begin(), s.proof_bytes.end());
        rep.proof_bytes_max = *std::max_element(s.proof_bytes.begin(), s.proof_bytes.end());
    }
    for (const char* phase : {"outsource", "challenge", "prove", "verify", "update"})
        rep.timings.push_back(detail::summarize(phase, s.ms[phase]));
    return rep;
}

inline nlohmann::json to_json(const BenchReport& r) {
    nlohmann::json j;
    j["protocol"] = wire::to_string(r.config.protocol);
    j["profile"] = r.config.profile;
    j["file_size"] = r.config.file_size;
    j["block_size"] = r.config.block_size;
    j["segment_width_bits"] = r.segment_bits;
    j["m"] = r.m;
    j["n"] = r.n;
    j["l"] = r.config.l;
    j["beta"] = r.config.beta;
    j["runs"] = r.config.runs;
    j["audits"] = r.audits;
    j["storage_overhead_pct"] = r.storage_overhead_pct;
    j["proof_bytes"] = r.proof_bytes_mean;
    j["proof_bytes_min"] = r.proof_bytes_min;
    j["proof_bytes_max"] = r.proof_bytes_max;
    j["proof_bytes_excluding_block"] = r.proof_bytes_excluding_block;
    j["empirical_detection_rate"] = r.detection_rate;
    j["expected_detection_rate"] = r.expected_detection;
    for (const auto& t : r.timings) j["timings_ms"][t.phase] = {{"median", t.median_ms}, {"mean", t.mean_ms}, {"samples", t.samples}};
    return j;
}

/// Flat key,value rows.
inline std::string to_csv(const BenchReport& r) {
    std::ostringstream os;
    os << "key,value\n";
    auto j = to_json(r);
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "timings_ms") continue;
        os << it.key() << ',' << (it->is_string() ? it->get<std::string>() : it->dump()) << '\n';
    }
    for (const auto& t : r.timings) {
        os << "time_" << t.phase << "_median_ms," << t.median_ms << '\n';
        os << "time_" << t.phase << "_mean_ms," << t.mean_ms << '\n';
    }
    return os.str();
}

inline std::string to_table(const BenchReport& r) {
    std::ostringstream os;
    os << std::fixed;
    os << wire::to_string(r.config.protocol) << " / " << r.config.profile << " profile: " << r.config.file_size << " B file, n' = "
       << r.config.block_size << " B, m = " << r.m << ", n = " << r.n << ", l = " << r.config.l << ", beta = "
       << std::setprecision(3) << r.config.beta << '\n';
    os << std::setprecision(2);
    os << "  storage overhead      " << r.storage_overhead_pct << " %\n";
    os << "  proof bytes           " << r.proof_bytes_mean << " (min " << r.proof_bytes_min << ", max " << r.proof_bytes_max << ")\n";
    os << "  proof bytes w/o block " << r.proof_bytes_excluding_block << '\n';
    os << std::setprecision(4);
    os << "  detection             " << r.detection_rate << " observed, " << r.expected_detection << " expected over "
       << r.audits << " audits\n";
    os << "  phase        median ms     mean ms  samples\n";
    for (const auto& t : r.timings)
        os << "  " << std::left << std::setw(10) << t.phase << std::right << std::setw(12) << t.median_ms << std::setw(12)
           << t.mean_ms << std::setw(9) << t.samples << '\n';
    return os.str();
}

/// Mean DSCS I audit proof bytes at each file size m (blocks of n segments).
inline std::vector<std::pair<std::uint64_t, double>> proof_size_curve(const std::vector<std::uint64_t>& ms, std::size_t n,
                                                                      std::uint64_t l, std::uint64_t audits, Rng& rng) {
    std::vector<std::pair<std::uint64_t, double>> out;
    auto st0 = dscs1::keygen(test_profile(), 1, n, rng);
    for (auto m : ms) {
        auto st = st0;
        st.pk.hs.clear();
        std::vector<DataBlock> blocks;
        for (std::uint64_t i = 0; i < m; ++i) {
            DataBlock v;
            for (std::size_t j = 0; j < n; ++j) v.push_back(rng.below(BigInt(1) << 16));
            blocks.push_back(std::move(v));
        }
        auto server = dscs1::ServerFile::from_upload(dscs1::outsource_blocks(std::move(blocks), st, rng));
        double total = 0;
        for (std::uint64_t a = 0; a < audits; ++a) {
            auto c = dscs1::challenge(st.pk, l, rng);
            auto p = dscs1::prove(server, c);
            if (!dscs1::verify_audit(c, p, st.pk)) fail(ErrorCode::Internal, "honest audit rejected during size sweep");
            total += static_cast<double>(p.encode().size());
        }
        out.emplace_back(m, total / static_cast<double>(audits));
    }
    return out;
}

struct TrendFit {
    double a = 0, b = 0;         // bytes ~ a + b log2 m
    double max_rel_residual = 0;  // of the log fit
    double linear_share = 0;      // |c m_max| / bytes(m_max) when a c*m term is added
};

/// Least squares on [1, log2 m] and on [1, log2 m, m].
inline TrendFit fit_log_trend(const std::vector<std::pair<std::uint64_t, double>>& pts) {
    auto solve = [](std::vector<std::vector<double>> a, std::vector<double> y) {
        const std::size_t k = a[0].size();
        std::vector<std::vector<double>> n(k, std::vector<double>(k + 1, 0));
        for (std::size_t r = 0; r < a.size(); ++r)
            for (std::size_t i = 0; i < k; ++i) {
                for (std::size_t j = 0; j < k; ++j) n[i][j] += a[r][i] * a[r][j];
                n[i][k] += a[r][i] * y[r];
            }
        for (std::size_t c = 0; c < k; ++c) {
            std::size_t p = c;
            for (std::size_t r = c + 1; r < k; ++r)
                if (std::abs(n[r][c]) > std::abs(n[p][c])) p = r;
            std::swap(n[c], n[p]);
            for (std::size_t r = 0; r < k; ++r) {
                if (r == c) continue;
                double f = n[r][c] / n[c][c];
                for (std::size_t j = c; j <= k; ++j) n[r][j] -= f * n[c][j];
            }
        }
        std::vector<double> x(k);
        for (std::size_t i = 0; i < k; ++i) x[i] = n[i][k] / n[i][i];
        return x;
    };
    std::vector<std::vector<double>> a2, a3;
    std::vector<double> y;
    double m_max = 0;
    for (const auto& [m, bytes] : pts) {
        double lg = std::log2(static_cast<double>(m));
        a2.push_back({1, lg});
        a3.push_back({1, lg, static_cast<double>(m)});
        y.push_back(bytes);
        m_max = std::max(m_max, static_cast<double>(m));
    }
    TrendFit f;
    auto x2 = solve(a2, y);
    f.a = x2[0];
    f.b = x2[1];
    for (std::size_t r = 0; r < y.size(); ++r)
        f.max_rel_residual = std::max(f.max_rel_residual, std::abs(y[r] - (x2[0] + x2[1] * a2[r][1])) / y[r]);
    auto x3 = solve(a3, y);
    f.linear_share = std::abs(x3[2] * m_max) / y.back();
    return f;
}

} // namespace dscs::bench

#endif // DSCS_BENCH_HPP
