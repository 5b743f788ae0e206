// Operator CLI: key generation, outsourcing, reads, updates, audits, bench.
//
// Exit codes: 0 success, 1 verification failure, 2 transport or usage error.
// Option precedence: command-line flag, then environment variable, then default.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "dscs/bench.hpp"
#include "dscs/client.hpp"

using namespace dscs;

namespace {

constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kUsage = 2;

struct VerificationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Key file: "DSCK" | protocol(1B) | client state.
struct KeyFile {
    wire::Protocol protocol = wire::Protocol::Dscs1;
    std::optional<dscs1::ClientState> s1;
    std::optional<dscs2::ClientState> s2;

    Bytes fid() const { return s1 ? s1->fid() : s2->pub.fid; }

    static KeyFile load(const std::string& path) {
        if (path.empty()) fail(ErrorCode::Usage, "--key-file is required");
        Bytes raw;
        try {
            raw = service::read_file(path);
        } catch (const Error&) {
            fail(ErrorCode::Usage, "cannot read key file " + path);
        }
        ByteReader r(raw);
        auto magic = r.raw(4);
        if (!std::equal(magic.begin(), magic.end(), "DSCK")) fail(ErrorCode::Usage, path + " is not a key file");
        KeyFile k;
        k.protocol = wire::protocol_from(r.u8());
        auto rest = r.raw(r.remaining());
        if (k.protocol == wire::Protocol::Dscs1) {
            k.s1 = dscs1::ClientState::decode(rest);
        } else {
            k.s2 = dscs2::ClientState::decode(rest);
        }
        return k;
    }

    void save(const std::string& path) const {
        ByteWriter w;
        w.raw(to_bytes("DSCK")).u8(static_cast<std::uint8_t>(protocol));
        w.raw(s1 ? s1->encode() : s2->encode());
        service::write_file_durable(std::filesystem::absolute(path), w.take());
    }
};

struct Globals {
    std::string server = "127.0.0.1:7410";
    std::string key_file;
    std::string fid;
    std::string protocol = "dscs1";
    std::string profile = "test";
};

wire::Protocol parse_protocol(const std::string& s) {
    if (s == "dscs1") return wire::Protocol::Dscs1;
    if (s == "dscs2") return wire::Protocol::Dscs2;
    fail(ErrorCode::Usage, "protocol must be dscs1 or dscs2");
}

KeyFile load_checked(const Globals& g) {
    auto k = KeyFile::load(g.key_file);
    if (!g.fid.empty() && from_hex(g.fid) != k.fid()) fail(ErrorCode::Usage, "--fid does not match the key file");
    return k;
}

Bytes read_input(const std::string& path) {
    if (path.empty()) fail(ErrorCode::Usage, "--in is required");
    try {
        return service::read_file(path);
    } catch (const Error&) {
        fail(ErrorCode::Usage, "cannot read " + path);
    }
}

struct Connection {
    service::TcpTransport transport;
    Remote remote;
    explicit Connection(const std::string& addr) : transport(service::Endpoint::parse(addr)), remote(transport) {}
};

void check(bool ok, const std::string& what) {
    if (!ok) throw VerificationFailure(what);
}

Layout layout_of(const KeyFile& k) { return k.s1 ? k.s1->layout() : k.s2->layout(); }

int cmd_keygen(const Globals& g, std::size_t block_size) {
    if (g.key_file.empty()) fail(ErrorCode::Usage, "--key-file is required");
    auto prof = profile_by_name(g.profile);
    auto rng = Rng::system();
    KeyFile k;
    k.protocol = parse_protocol(g.protocol);
    if (k.protocol == wire::Protocol::Dscs1) {
        auto layout = Layout::for_block_bytes(block_size, prof.segment_bytes());
        // outsource sizes the h list to the file, one placeholder is enough here.
        k.s1 = dscs1::keygen(prof, 1, layout.segments_per_block, rng);
    } else {
        auto layout = Layout::for_block_bytes(block_size, dscs2::segment_bytes(dscs2::suite_for(prof.curve_id)));
        k.s2 = dscs2::keygen2(prof, 0, layout.segments_per_block, rng);
    }
    k.save(g.key_file);
    std::cout << "fid " << to_hex(k.fid()) << "\n";
    return kOk;
}

int cmd_outsource(const Globals& g, const std::string& in) {
    auto k = load_checked(g);
    Bytes file = read_input(in);
    Connection c(g.server);
    std::uint64_t m = 0;
    if (k.s1) {
        auto rng = Rng::system();
        m = c.remote.upload(dscs1::outsource(file, *k.s1, rng));
    } else {
        m = c.remote.upload(dscs2::outsource2(file, *k.s2));
    }
    k.save(g.key_file);
    std::cout << "fid " << to_hex(k.fid()) << " blocks " << m << "\n";
    return kOk;
}

int cmd_read(const Globals& g, std::uint64_t i, const std::string& out) {
    auto k = load_checked(g);
    Connection c(g.server);
    DataBlock v;
    if (k.s1) {
        check(verified_read1(c.remote, *k.s1, i, &v), "block " + std::to_string(i) + " failed verification");
    } else {
        check(verified_read2(c.remote, k.s2->pub, i, &v), "block " + std::to_string(i) + " failed verification");
    }
    Bytes bytes = layout_of(k).block_bytes_of(v);
    if (out.empty()) {
        std::cout << to_hex(bytes) << "\n";
    } else {
        std::ofstream(out, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()));
    }
    std::cerr << "block " << i << " verified\n";
    return kOk;
}

int cmd_append(const Globals& g, const std::string& in);

int cmd_update(const Globals& g, UpdateType type, std::uint64_t i, const std::string& in) {
    auto k = load_checked(g);
    if (k.s2) {
        // Only an insert after the last block is allowed, and that is an append.
        if (type != UpdateType::Insert || i != k.s2->pub.m)
            fail(ErrorCode::AppendOnly, std::string(skiplist::to_string(type)) + " is not supported");
        return cmd_append(g, in);
    }
    std::optional<DataBlock> v;
    if (type != UpdateType::Delete) v = layout_of(k).pack_block(read_input(in));
    Connection c(g.server);
    auto rng = Rng::system();
    bool ok = false;
    try {
        ok = remote_update1(c.remote, *k.s1, type, i, v, rng);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::StaleProof) throw VerificationFailure(e.what());
        throw;
    }
    check(ok, std::string(skiplist::to_string(type)) + " at " + std::to_string(i) + " was not confirmed by the server's proof");
    k.save(g.key_file);
    std::cerr << skiplist::to_string(type) << " at " << i << " verified, blocks " << k.s1->pk.blocks() << "\n";
    return kOk;
}

int cmd_append(const Globals& g, const std::string& in) {
    auto k = load_checked(g);
    if (k.s1) return cmd_update(g, UpdateType::Insert, k.s1->pk.blocks(), in);
    DataBlock v = layout_of(k).pack_block(read_input(in));
    Connection c(g.server);
    check(remote_append2(c.remote, *k.s2, v), "server did not acknowledge the append at the expected position");
    k.save(g.key_file);
    std::cerr << "appended, blocks " << k.s2->pub.m << "\n";
    return kOk;
}

int cmd_audit(const Globals& g, std::uint64_t l, std::uint64_t trials) {
    auto k = load_checked(g);
    Connection c(g.server);
    auto rng = Rng::system();
    const std::uint64_t m = k.s1 ? k.s1->pk.blocks() : k.s2->pub.m;
    l = std::min(l, m);
    std::uint64_t passed = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        bool ok = k.s1 ? remote_audit1(c.remote, k.s1->pk, l, rng) : remote_audit2(c.remote, k.s2->pub, l, rng);
        if (ok) ++passed;
    }
    std::cout << "audit " << passed << "/" << trials << " passed (l = " << l << ", m = " << m << ")\n";
    check(passed == trials, "audit rejected");
    return kOk;
}

int cmd_bench(const Globals& g, bench::BenchConfig cfg, const std::string& out) {
    cfg.protocol = parse_protocol(g.protocol);
    cfg.profile = g.profile;
    auto rep = bench::run_bench(cfg);
    if (out == "json") {
        std::cout << bench::to_json(rep).dump(2) << "\n";
    } else if (out == "csv") {
        std::cout << bench::to_csv(rep);
    } else {
        std::cout << bench::to_table(rep);
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic secure cloud storage client and auditor"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--server", g.server, "storage server host:port")->envname("DSCS_SERVER")->capture_default_str();
    app.add_option("--key-file", g.key_file, "client key file")->envname("DSCS_KEY_FILE");
    app.add_option("--fid", g.fid, "expected file id (hex)")->envname("DSCS_FID");
    app.add_option("--protocol", g.protocol, "dscs1 or dscs2")
        ->envname("DSCS_PROTOCOL")
        ->check(CLI::IsMember({"dscs1", "dscs2"}))
        ->capture_default_str();
    app.add_option("--profile", g.profile, "test or full")
        ->envname("DSCS_PROFILE")
        ->check(CLI::IsMember({"test", "full"}))
        ->capture_default_str();

    std::size_t block_size = 4096;
    auto* keygen = app.add_subcommand("keygen", "generate a key file");
    keygen->add_option("--block-size", block_size, "block size n' in bytes")->capture_default_str();

    std::string in, out_path;
    std::uint64_t index = 0;
    auto* outsource = app.add_subcommand("outsource", "tag a file and upload it");
    outsource->add_option("--in", in, "file to outsource")->required();

    auto* read = app.add_subcommand("read", "fetch and verify one block");
    read->add_option("--index", index)->required();
    read->add_option("--output", out_path, "write the block here instead of hex to stdout");

    auto* insert = app.add_subcommand("insert", "insert a block after position --index");
    insert->add_option("--index", index)->required();
    insert->add_option("--in", in)->required();
    auto* modify = app.add_subcommand("modify", "replace block --index");
    modify->add_option("--index", index)->required();
    modify->add_option("--in", in)->required();
    auto* del = app.add_subcommand("delete", "delete block --index");
    del->add_option("--index", index)->required();
    auto* append = app.add_subcommand("append", "append a block at the end");
    append->add_option("--in", in)->required();

    std::uint64_t l = 10, trials = 1;
    auto* audit = app.add_subcommand("audit", "challenge the server and verify its proof");
    audit->add_option("--l", l, "challenge size")->envname("DSCS_L")->capture_default_str();
    audit->add_option("--trials", trials, "number of audits")->capture_default_str();

    bench::BenchConfig cfg;
    std::string out = "table";
    auto* bench_cmd = app.add_subcommand("bench", "measure sizes, timings and detection rates");
    bench_cmd->add_option("--l", cfg.l, "challenge size")->capture_default_str();
    bench_cmd->add_option("--beta", cfg.beta, "corrupted fraction")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    bench_cmd->add_option("--trials", cfg.trials, "audits per run")->capture_default_str();
    bench_cmd->add_option("--runs", cfg.runs, "measured runs (one warm-up run is added)")->capture_default_str();
    bench_cmd->add_option("--file-size", cfg.file_size, "bytes")->capture_default_str();
    bench_cmd->add_option("--block-size", cfg.block_size, "n' in bytes")->capture_default_str();
    bench_cmd->add_option("--seed", cfg.seed)->capture_default_str();
    bench_cmd->add_option("--out", out, "table, csv or json")->check(CLI::IsMember({"table", "csv", "json"}))->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*keygen) return cmd_keygen(g, block_size);
        if (*outsource) return cmd_outsource(g, in);
        if (*read) return cmd_read(g, index, out_path);
        if (*insert) return cmd_update(g, UpdateType::Insert, index, in);
        if (*modify) return cmd_update(g, UpdateType::Modify, index, in);
        if (*del) return cmd_update(g, UpdateType::Delete, index, "");
        if (*append) return cmd_append(g, in);
        if (*audit) return cmd_audit(g, l, trials);
        if (*bench_cmd) return cmd_bench(g, cfg, out);
    } catch (const VerificationFailure& e) {
        std::cerr << "verification failed: " << e.what() << "\n";
        return kVerifyFailed;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::AppendOnly) {
            std::cerr << "usage error: append-only file, only appends are supported (" << e.what() << ")\n";
        } else {
            std::cerr << "error: " << e.what() << "\n";
        }
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
