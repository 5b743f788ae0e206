// Drives the dscs and dscs_server binaries as separate processes.

#include <gtest/gtest.h>

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <json.hpp>

#include "dscs/service/storage.hpp"
#include "support.hpp"

extern char** environ;

namespace {

using dscs::testing::TempDir;
namespace fs = std::filesystem;

struct Outcome {
    int rc = -1;
    std::string out;
};

std::vector<char*> argv_of(std::vector<std::string>& args) {
    std::vector<char*> v;
    for (auto& a : args) v.push_back(a.data());
    v.push_back(nullptr);
    return v;
}

/// Runs to completion with stdout and stderr merged.
Outcome run(std::vector<std::string> args) {
    int p[2];
    if (::pipe(p) != 0) throw std::runtime_error("pipe");
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_adddup2(&fa, p[1], 1);
    posix_spawn_file_actions_adddup2(&fa, p[1], 2);
    posix_spawn_file_actions_addclose(&fa, p[0]);
    auto av = argv_of(args);
    pid_t pid;
    int err = posix_spawn(&pid, av[0], &fa, nullptr, av.data(), environ);
    posix_spawn_file_actions_destroy(&fa);
    ::close(p[1]);
    if (err != 0) throw std::runtime_error("spawn " + args[0]);
    Outcome o;
    char buf[4096];
    for (ssize_t k; (k = ::read(p[0], buf, sizeof buf)) > 0;) o.out.append(buf, static_cast<std::size_t>(k));
    ::close(p[0]);
    int status = 0;
    ::waitpid(pid, &status, 0);
    o.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

/// A dscs_server child on an ephemeral port.
class ServerProcess {
public:
    ServerProcess(const fs::path& data, std::vector<std::string> extra = {}) {
        std::vector<std::string> args{DSCS_SERVER_BIN, "--listen", "127.0.0.1:0", "--data-dir", data.string()};
        args.insert(args.end(), extra.begin(), extra.end());
        int p[2];
        if (::pipe(p) != 0) throw std::runtime_error("pipe");
        posix_spawn_file_actions_t fa;
        posix_spawn_file_actions_init(&fa);
        posix_spawn_file_actions_adddup2(&fa, p[1], 1);
        posix_spawn_file_actions_addclose(&fa, p[0]);
        auto av = argv_of(args);
        int err = posix_spawn(&pid_, av[0], &fa, nullptr, av.data(), environ);
        posix_spawn_file_actions_destroy(&fa);
        ::close(p[1]);
        if (err != 0) throw std::runtime_error("spawn server");
        std::string line;
        char c;
        while (::read(p[0], &c, 1) == 1 && c != '\n') line += c;
        ::close(p[0]);
        auto colon = line.rfind(':');
        auto space = line.find(' ', colon);
        if (line.rfind("listening on ", 0) != 0 || colon == std::string::npos) throw std::runtime_error("server said: " + line);
        addr_ = "127.0.0.1:" + line.substr(colon + 1, space - colon - 1);
    }
    ~ServerProcess() { stop(); }

    /// SIGTERM, then the exit status.
    int stop() {
        if (pid_ <= 0) return rc_;
        ::kill(pid_, SIGTERM);
        int status = 0;
        ::waitpid(pid_, &status, 0);
        pid_ = -1;
        rc_ = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        return rc_;
    }

    const std::string& addr() const { return addr_; }

private:
    pid_t pid_ = -1;
    int rc_ = -1;
    std::string addr_;
};

void write_random(const fs::path& p, std::size_t n, std::uint64_t seed) {
    auto rng = dscs::Rng::deterministic(seed);
    auto b = rng.bytes(n);
    std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), static_cast<long>(b.size()));
}

struct CliFixture : ::testing::Test {
    TempDir dir;
    fs::path key = dir.path / "client.key";
    fs::path file = dir.path / "file.bin";
    fs::path block = dir.path / "block.bin";

    void SetUp() override {
        write_random(file, 20000, 1);
        write_random(block, 4096, 2);
    }

    Outcome cli(const std::string& server, std::vector<std::string> args) {
        std::vector<std::string> full{DSCS_CLI_BIN, "--server", server, "--key-file", key.string()};
        full.insert(full.end(), args.begin(), args.end());
        return run(full);
    }
};

TEST_F(CliFixture, Dscs1LifecycleAgainstHonestServer) {
    ServerProcess srv(dir.path / "data");
    auto s = srv.addr();
    ASSERT_EQ(cli(s, {"keygen"}).rc, 0);
    auto up = cli(s, {"outsource", "--in", file.string()});
    ASSERT_EQ(up.rc, 0) << up.out;
    EXPECT_NE(up.out.find("blocks 5"), std::string::npos) << up.out;
    auto a = cli(s, {"audit", "--l", "3", "--trials", "4"});
    EXPECT_EQ(a.rc, 0) << a.out;
    EXPECT_EQ(cli(s, {"modify", "--index", "2", "--in", block.string()}).rc, 0);
    auto out = dir.path / "read.bin";
    ASSERT_EQ(cli(s, {"read", "--index", "2", "--output", out.string()}).rc, 0);
    EXPECT_EQ(dscs::service::read_file(out), dscs::service::read_file(block));
    EXPECT_EQ(cli(s, {"delete", "--index", "1"}).rc, 0);
    EXPECT_EQ(cli(s, {"insert", "--index", "0", "--in", block.string()}).rc, 0);
    EXPECT_EQ(cli(s, {"append", "--in", block.string()}).rc, 0);
    EXPECT_EQ(cli(s, {"audit"}).rc, 0);
    auto bad = cli(s, {"read", "--index", "99"});
    EXPECT_EQ(bad.rc, 2) << bad.out;

    // State survives a server restart.
    EXPECT_EQ(srv.stop(), 0);
    ServerProcess again(dir.path / "data");
    EXPECT_EQ(cli(again.addr(), {"audit", "--trials", "2"}).rc, 0);
}

TEST_F(CliFixture, CorruptedServerFailsAuditWithExitOne) {
    auto data = dir.path / "data";
    {
        ServerProcess srv(data);
        ASSERT_EQ(cli(srv.addr(), {"keygen"}).rc, 0);
        ASSERT_EQ(cli(srv.addr(), {"outsource", "--in", file.string()}).rc, 0);
    }
    ServerProcess bad(data, {"--corrupt-fraction", "1"});
    auto a = cli(bad.addr(), {"audit", "--l", "2"});
    EXPECT_EQ(a.rc, 1) << a.out;
    EXPECT_NE(a.out.find("verification failed"), std::string::npos);
    EXPECT_EQ(cli(bad.addr(), {"read", "--index", "1"}).rc, 1);
}

TEST_F(CliFixture, DroppedUpdateFailsWithExitOne) {
    auto data = dir.path / "data";
    {
        ServerProcess srv(data);
        ASSERT_EQ(cli(srv.addr(), {"keygen"}).rc, 0);
        ASSERT_EQ(cli(srv.addr(), {"outsource", "--in", file.string()}).rc, 0);
    }
    ServerProcess bad(data, {"--drop-updates"});
    EXPECT_EQ(cli(bad.addr(), {"insert", "--index", "1", "--in", block.string()}).rc, 1);
}

TEST_F(CliFixture, Dscs2RejectsInsertAsUsageError) {
    ServerProcess srv(dir.path / "data");
    auto s = srv.addr();
    ASSERT_EQ(cli(s, {"--protocol", "dscs2", "keygen"}).rc, 0);
    ASSERT_EQ(cli(s, {"outsource", "--in", file.string()}).rc, 0);
    EXPECT_EQ(cli(s, {"append", "--in", block.string()}).rc, 0);
    for (const char* cmd : {"insert", "modify"}) {
        auto r = cli(s, {cmd, "--index", "1", "--in", block.string()});
        EXPECT_EQ(r.rc, 2) << cmd;
        EXPECT_NE(r.out.find("append-only"), std::string::npos) << r.out;
    }
    auto d = cli(s, {"delete", "--index", "1"});
    EXPECT_EQ(d.rc, 2);
    EXPECT_NE(d.out.find("append-only"), std::string::npos);
    EXPECT_EQ(cli(s, {"audit", "--trials", "2"}).rc, 0);
}

TEST_F(CliFixture, UnreachableServerAndBadUsageExitTwo) {
    ASSERT_EQ(cli("127.0.0.1:1", {"keygen"}).rc, 0);
    auto r = cli("127.0.0.1:1", {"audit"});
    EXPECT_EQ(r.rc, 2);
    EXPECT_NE(r.out.find("Transport"), std::string::npos) << r.out;
    EXPECT_EQ(cli("127.0.0.1:1", {"frobnicate"}).rc, 2);
    EXPECT_EQ(cli("127.0.0.1:1", {"read"}).rc, 2);
    EXPECT_EQ(run({DSCS_CLI_BIN, "--key-file", (dir.path / "missing").string(), "audit"}).rc, 2);
}

TEST_F(CliFixture, EnvironmentSuppliesDefaultsAndFlagsWin) {
    ServerProcess srv(dir.path / "data");
    ::setenv("DSCS_SERVER", srv.addr().c_str(), 1);
    ::setenv("DSCS_KEY_FILE", key.string().c_str(), 1);
    ::setenv("DSCS_PROTOCOL", "dscs2", 1);
    auto k = run({DSCS_CLI_BIN, "keygen"});
    auto o = run({DSCS_CLI_BIN, "outsource", "--in", file.string()});
    ::setenv("DSCS_SERVER", "127.0.0.1:1", 1);
    auto a = run({DSCS_CLI_BIN, "--server", srv.addr(), "audit"});
    auto fail = run({DSCS_CLI_BIN, "audit"});
    ::unsetenv("DSCS_SERVER");
    ::unsetenv("DSCS_KEY_FILE");
    ::unsetenv("DSCS_PROTOCOL");
    EXPECT_EQ(k.rc, 0);
    EXPECT_EQ(o.rc, 0) << o.out;
    EXPECT_EQ(a.rc, 0) << a.out;
    EXPECT_EQ(fail.rc, 2);
}

TEST(Cli, BenchJsonParses) {
    for (const char* proto : {"dscs1", "dscs2"}) {
        auto r = run({DSCS_CLI_BIN, "--protocol", proto, "bench", "--file-size", "65536", "--trials", "4", "--runs", "1",
                      "--beta", "0.5", "--out", "json"});
        ASSERT_EQ(r.rc, 0) << r.out;
        auto j = nlohmann::json::parse(r.out);
        EXPECT_EQ(j["protocol"], proto);
        EXPECT_EQ(j["audits"], 4);
        EXPECT_GT(j["proof_bytes"].get<double>(), 0);
        EXPECT_NEAR(j["expected_detection_rate"].get<double>(), 1 - std::pow(0.5, 10), 1e-12);
        for (const char* phase : {"outsource", "challenge", "prove", "verify", "update"})
            EXPECT_TRUE(j["timings_ms"].contains(phase)) << phase;
    }
    EXPECT_EQ(run({DSCS_CLI_BIN, "bench", "--beta", "2"}).rc, 2);
}

TEST(Cli, ServerRejectsBadConfig) {
    TempDir d;
    auto cfg = d.path / "server.toml";
    std::ofstream(cfg) << "workers = 0\n";
    auto data = (d.path / "data").string();
    EXPECT_EQ(run({DSCS_SERVER_BIN, "--config", cfg.string(), "--data-dir", data}).rc, 2);
    EXPECT_EQ(run({DSCS_SERVER_BIN, "--listen", "not-an-address", "--data-dir", data}).rc, 2);
    EXPECT_FALSE(fs::exists(data));
}

} // namespace
