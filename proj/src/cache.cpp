#include "mcqa/cache.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "json.hpp"
#include "mcqa/error.hpp"
#include "mcqa/rng.hpp"

namespace mcqa {

using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// checksum covers the key and the score fields in a fixed serialization
std::uint64_t entry_checksum(const std::string& key, const CacheEntry& entry) {
    std::ostringstream payload;
    payload.precision(17);
    payload << key << '\x1f' << entry.score.logprob_sum << '\x1f' << entry.score.token_count
            << '\x1f' << entry.score.byte_length << '\x1f' << (entry.fallback ? 1 : 0);
    return fnv1a64(payload.str());
}

}  // namespace

ScoreCache::ScoreCache(std::filesystem::path dir) : root_(std::move(dir)) {
    root_ /= "v1";
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) {
        throw Error(ErrorKind::IoError,
                    "cannot create cache dir " + root_.string() + ": " + ec.message());
    }
}

std::string ScoreCache::key_hash(const std::string& key_material) {
    const std::uint64_t a = fnv1a64(key_material);
    // second pass over the same bytes with a shifted basis for 128 bits total
    const std::uint64_t b = fnv1a64(key_material, 0x9e3779b97f4a7c15ULL);
    return hex64(a) + hex64(b);
}

std::filesystem::path ScoreCache::entry_path(const std::string& hash) const {
    return root_ / hash.substr(0, 2) / (hash + ".json");
}

std::optional<CacheEntry> ScoreCache::get(const std::string& key_material) {
    const std::filesystem::path path = entry_path(key_hash(key_material));
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        misses_.fetch_add(1);
        return std::nullopt;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    in.close();

    CacheEntry entry;
    bool ok = false;
    try {
        const json obj = json::parse(buffer.str());
        const std::string key = obj.at("key").get<std::string>();
        entry.score.logprob_sum = obj.at("logprob_sum").get<double>();
        entry.score.token_count = obj.at("token_count").get<int>();
        entry.score.byte_length = obj.at("byte_length").get<int>();
        entry.fallback = obj.value("fallback", false);
        ok = key == key_material &&
             obj.at("checksum").get<std::uint64_t>() == entry_checksum(key, entry);
    } catch (const json::exception&) {
        ok = false;
    }
    if (!ok) {
        // corrupt or foreign entry: evict and report a miss
        corrupt_.fetch_add(1);
        misses_.fetch_add(1);
        std::error_code ec;
        std::filesystem::remove(path, ec);
        return std::nullopt;
    }
    hits_.fetch_add(1);
    return entry;
}

void ScoreCache::put(const std::string& key_material, const CacheEntry& entry) {
    const std::string hash = key_hash(key_material);
    const std::filesystem::path path = entry_path(hash);
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) {
        throw Error(ErrorKind::IoError,
                    "cannot create cache shard " + path.parent_path().string() + ": " +
                        ec.message());
    }

    json obj{{"key", key_material},
             {"logprob_sum", entry.score.logprob_sum},
             {"token_count", entry.score.token_count},
             {"byte_length", entry.score.byte_length},
             {"fallback", entry.fallback},
             {"checksum", entry_checksum(key_material, entry)}};

    const std::filesystem::path temp =
        path.parent_path() / (hash + ".tmp" + std::to_string(temp_counter_.fetch_add(1)));
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorKind::IoError, "cannot write cache temp file " + temp.string());
        }
        out << obj.dump();
    }
    std::filesystem::rename(temp, path, ec);
    if (ec) {
        std::filesystem::remove(temp, ec);
        throw Error(ErrorKind::IoError, "cannot publish cache entry " + path.string());
    }
}

}  // namespace mcqa
