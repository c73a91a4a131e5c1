#pragma once

#include "pags/optimizer.hpp"
#include "pags/priority.hpp"

#include <map>
#include <string>

namespace pags {

/// `key = value` lines; `#` starts a comment. Throws ParseError on a line
/// without `=` or an empty key.
std::map<std::string, std::string> parse_key_values(const std::string& text);
std::map<std::string, std::string> load_key_values(const std::string& path);

/// Ablation axes: semantic pruning + semantic dropout (SPR), plain gradient
/// pruning (SP), plain dropout (SD) and the priority-driven renderer (PDR).
struct Toggles {
    bool sp = true;
    bool sd = true;
    bool spr = true;
    bool pdr = true;
};

struct RunConfig {
    TrainConfig train;
    PriorityConfig priority;
    Toggles toggles;

    std::string views;
    std::string ply_in;
    std::string ply_out;
    std::string out_dir;
    std::string classes;
    std::string log;

    /// Sets one key; throws ConfigError for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    void apply(const std::map<std::string, std::string>& values);

    /// `NAME=on|off` for NAME in SP, SD, SPR, PDR.
    void set_toggle(const std::string& assignment);

    /// TrainConfig with the toggles applied. SPR keeps the configured alpha
    /// and beta and supersedes SP/SD; without SPR, SP prunes by s_grad alone
    /// (alpha = 0) and SD drops uniformly (beta = 0); a disabled axis turns
    /// pruning (rates 0) or dropout (gamma 0) off.
    TrainConfig effective_train() const;
};

bool parse_bool(const std::string& value);

}  // namespace pags
