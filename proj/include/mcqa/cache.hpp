#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "mcqa/scoring.hpp"

namespace mcqa {

// One cached continuation score plus provenance the caller wants back.
struct CacheEntry {
    ContinuationScore score;
    bool fallback = false;  // span isolated by two-pass subtraction
};

// Content-addressed score store.
//
// Layout: <dir>/v1/<first 2 key hex>/<32 hex key>.json. Each file holds the
// full key material, the score fields and a checksum; reads verify both, and
// anything unreadable or mismatched is evicted and counted as a miss. Writes
// go through a temp file and an atomic rename, so concurrent readers always
// see a complete entry and concurrent writers of one key just race benignly.
class ScoreCache {
public:
    explicit ScoreCache(std::filesystem::path dir);

    std::optional<CacheEntry> get(const std::string& key_material);
    void put(const std::string& key_material, const CacheEntry& entry);

    // 32 lowercase hex chars, 128 bits from two independent FNV-1a passes.
    static std::string key_hash(const std::string& key_material);

    const std::filesystem::path& root() const { return root_; }
    std::uint64_t hits() const { return hits_.load(); }
    std::uint64_t misses() const { return misses_.load(); }
    std::uint64_t corrupt_evictions() const { return corrupt_.load(); }

private:
    std::filesystem::path entry_path(const std::string& hash) const;

    std::filesystem::path root_;  // <dir>/v1
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
    std::atomic<std::uint64_t> corrupt_{0};
    std::atomic<std::uint64_t> temp_counter_{0};
};

}  // namespace mcqa
