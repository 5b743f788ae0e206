// Storage server. Serves the wire protocol over TCP from a data directory.
//
// The misbehaviour flags exist for testing auditors against a dishonest
// provider; a real deployment leaves them off.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "dscs/service/transport.hpp"

using namespace dscs;

int main(int argc, char** argv) {
    CLI::App app{"Dynamic secure cloud storage server"};
    app.set_config("--config", "", "read options from a TOML or INI file");
    std::string listen = "127.0.0.1:7410";
    std::string data_dir = "./dscs-data";
    std::size_t workers = 4;
    std::size_t checkpoint_every = 64;
    service::Behavior behavior;
    app.add_option("--listen", listen, "host:port, port 0 picks a free one")->envname("DSCS_LISTEN")->capture_default_str();
    app.add_option("--data-dir", data_dir)->envname("DSCS_DATA_DIR")->capture_default_str();
    app.add_option("--workers", workers)->check(CLI::Range(1, 256))->capture_default_str();
    app.add_option("--checkpoint-every", checkpoint_every, "log records between checkpoints")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_flag("--drop-updates", behavior.drop_updates);
    app.add_flag("--misplace-updates", behavior.misplace_updates);
    app.add_flag("--serve-stale", behavior.serve_stale);
    app.add_option("--corrupt-fraction", behavior.corrupt_fraction)->check(CLI::Range(0.0, 1.0));
    app.add_option("--seed", behavior.seed, "seed for --corrupt-fraction");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    // Block the signals before any thread starts so only sigwait sees them.
    sigset_t sigs;
    sigemptyset(&sigs);
    sigaddset(&sigs, SIGINT);
    sigaddset(&sigs, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

    try {
        auto ep = service::Endpoint::parse(listen);
        service::ServiceOptions opts;
        opts.data_dir = data_dir;
        opts.checkpoint_every = checkpoint_every;
        opts.behavior = behavior;
        service::Service svc(opts);
        service::TcpServer server(svc, ep, workers);
        std::cout << "listening on " << ep.host << ":" << server.port() << " ("
                  << svc.file_count() << " files)" << std::endl;
        if (!behavior.honest()) std::cerr << "warning: misbehaviour enabled\n";
        int sig = 0;
        sigwait(&sigs, &sig);
        std::cerr << "signal " << sig << ", shutting down\n";
        server.stop();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
