#ifndef DSCS_SERVICE_TRACE_HPP
#define DSCS_SERVICE_TRACE_HPP

#include <atomic>
#include <map>
#include <mutex>
#include <string>
#include <vector>

// Records when each critical section held its file lock, so tests can check
// after the fact that no write ever overlapped another operation on the
// same file.

namespace dscs::service {

enum class OpKind { Read, Audit, Write };

inline const char* to_string(OpKind k) {
    switch (k) {
    case OpKind::Read: return "read";
    case OpKind::Audit: return "audit";
    case OpKind::Write: return "write";
    }
    return "?";
}

struct TraceEvent {
    std::string file;
    OpKind kind;
    std::uint64_t begin;
    std::uint64_t end;
};

class TraceRecorder {
public:
    class Scope {
    public:
        Scope(TraceRecorder* rec, std::string file, OpKind kind) : rec_(rec), file_(std::move(file)), kind_(kind) {
            if (rec_) begin_ = rec_->tick();
        }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;
        ~Scope() {
            if (rec_) rec_->add({std::move(file_), kind_, begin_, rec_->tick()});
        }

    private:
        TraceRecorder* rec_;
        std::string file_;
        OpKind kind_;
        std::uint64_t begin_ = 0;
    };

    std::uint64_t tick() { return clock_.fetch_add(1, std::memory_order_acq_rel) + 1; }

    void add(TraceEvent e) {
        std::lock_guard lock(mu_);
        events_.push_back(std::move(e));
    }

    std::vector<TraceEvent> events() const {
        std::lock_guard lock(mu_);
        return events_;
    }

private:
    std::atomic<std::uint64_t> clock_{0};
    mutable std::mutex mu_;
    std::vector<TraceEvent> events_;
};

/// First violation found, or "" when every write ran alone on its file.
inline std::string check_lock_discipline(const std::vector<TraceEvent>& events) {
    std::map<std::string, std::vector<const TraceEvent*>> by_file;
    for (const auto& e : events) by_file[e.file].push_back(&e);
    for (const auto& [file, evs] : by_file) {
        for (const auto* w : evs) {
            if (w->kind != OpKind::Write) continue;
            for (const auto* o : evs) {
                if (o == w) continue;
                if (w->begin < o->end && o->begin < w->end)
                    return "write [" + std::to_string(w->begin) + "," + std::to_string(w->end) + "] overlaps " +
                           to_string(o->kind) + " [" + std::to_string(o->begin) + "," + std::to_string(o->end) + "] on " + file;
            }
        }
    }
    return "";
}

} // namespace dscs::service

#endif // DSCS_SERVICE_TRACE_HPP
