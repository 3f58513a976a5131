#pragma once

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hypertune/objectives.hpp"
#include "hypertune/search_space.hpp"

namespace hypertune {

struct SubprocessOutcome {
    int exit_code = -1;
    bool timed_out = false;
    std::string output;
    double wall_seconds = 0.0;
};

/// Runs `command` under /bin/sh with extra environment entries, capturing
/// stdout. timeout_seconds == 0 means no timeout; on timeout the process is
/// killed.
inline SubprocessOutcome run_subprocess(const std::string& command,
                                        const std::vector<std::pair<std::string, std::string>>& env,
                                        double timeout_seconds = 0.0) {
    SubprocessOutcome out;
    int fds[2];
    if (pipe(fds) != 0) return out;

    const auto start = std::chrono::steady_clock::now();
    const pid_t pid = fork();
    if (pid < 0) {
        close(fds[0]);
        close(fds[1]);
        return out;
    }
    if (pid == 0) {
        dup2(fds[1], STDOUT_FILENO);
        close(fds[0]);
        close(fds[1]);
        for (const auto& [name, value] : env) setenv(name.c_str(), value.c_str(), 1);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }

    close(fds[1]);
    char buf[4096];
    bool open_pipe = true;
    while (open_pipe) {
        int wait_ms = -1;
        if (timeout_seconds > 0.0) {
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            const double remaining = timeout_seconds - elapsed;
            if (remaining <= 0.0) {
                kill(pid, SIGKILL);
                out.timed_out = true;
                break;
            }
            wait_ms = static_cast<int>(remaining * 1000.0) + 1;
        }
        pollfd pfd{fds[0], POLLIN, 0};
        const int rc = poll(&pfd, 1, wait_ms);
        if (rc == 0) continue;  // re-check the deadline
        if (rc < 0) break;
        const ssize_t n = read(fds[0], buf, sizeof(buf));
        if (n > 0)
            out.output.append(buf, static_cast<std::size_t>(n));
        else
            open_pipe = false;
    }
    close(fds[0]);

    int status = 0;
    waitpid(pid, &status, 0);
    if (WIFEXITED(status))
        out.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        out.exit_code = 128 + WTERMSIG(status);
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

/// Extracts the objective value from captured stdout. The grammar is the
/// exact line `HYPERTUNE_RESULT: <float>`; when several lines match, the
/// last one wins.
inline std::optional<double> parse_result_line(const std::string& output) {
    static const std::string prefix = "HYPERTUNE_RESULT: ";
    std::optional<double> result;
    std::size_t pos = 0;
    while (pos <= output.size()) {
        auto nl = output.find('\n', pos);
        if (nl == std::string::npos) nl = output.size();
        std::size_t end = nl;
        if (end > pos && output[end - 1] == '\r') --end;
        if (end - pos > prefix.size() && output.compare(pos, prefix.size(), prefix) == 0) {
            const char* begin = output.data() + pos + prefix.size();
            const char* stop = output.data() + end;
            double v = 0.0;
            const auto res = std::from_chars(begin, stop, v);
            if (res.ec == std::errc{} && res.ptr == stop) result = v;
        }
        pos = nl + 1;
    }
    return result;
}

/// Evaluates configurations by spawning a user command. Parameters arrive as
/// HT_PARAM_<name> environment entries plus HT_RESOURCE (units for the
/// requested level) and HT_MAX_RESOURCE. Nonzero exit, timeout, or a missing
/// result line make the evaluation failed; measured wall time is the cost.
class SubprocessObjective final : public Objective {
public:
    SubprocessObjective(std::string command, SearchSpace space, TunerParams tuner,
                        double timeout_seconds = 0.0)
        : command_(std::move(command)),
          space_(std::move(space)),
          tuner_(tuner),
          timeout_(timeout_seconds) {}

    const SearchSpace& space() const override { return space_; }
    const TunerParams& tuner() const override { return tuner_; }

    double cost(const Configuration&, int level) const override {
        return static_cast<double>(tuner_.resource_units(level));
    }

    EvalResult evaluate(const Configuration& config, int level) override {
        std::vector<std::pair<std::string, std::string>> env;
        for (std::size_t i = 0; i < space_.dimension(); ++i) {
            const auto& spec = space_.param(i);
            std::string value;
            switch (spec.kind) {
            case ParamKind::Continuous:
                value = detail::format_double(std::get<double>(config.values[i]));
                break;
            case ParamKind::Integer:
                value = std::to_string(std::get<std::int64_t>(config.values[i]));
                break;
            case ParamKind::Categorical:
                value = spec.choices[static_cast<std::size_t>(
                    std::get<std::int64_t>(config.values[i]))];
                break;
            }
            env.emplace_back("HT_PARAM_" + spec.name, std::move(value));
        }
        env.emplace_back("HT_RESOURCE", std::to_string(tuner_.resource_units(level)));
        env.emplace_back("HT_MAX_RESOURCE", std::to_string(tuner_.max_resource));

        const auto outcome = run_subprocess(command_, env, timeout_);
        const double cost = std::max(outcome.wall_seconds, 1e-6);
        if (outcome.timed_out || outcome.exit_code != 0) return {0.0, cost, true};
        const auto y = parse_result_line(outcome.output);
        if (!y) return {0.0, cost, true};
        return {*y, cost, false};
    }

private:
    std::string command_;
    SearchSpace space_;
    TunerParams tuner_;
    double timeout_;
};

}  // namespace hypertune
