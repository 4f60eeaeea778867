#pragma once

// Binary layout (all integers little-endian, doubles as IEEE-754 bit patterns):
//
//   magic      8 bytes  "PTMSAMP\0"
//   version    u32
//   K, T, V    u32 x 3
//   P, N       u64 x 2   paragraph and token counts
//   seed       u64
//   alpha, beta, h_p, h_t, gamma   f64 x 5
//   n_sweeps, burn_in, sample_lag, kernel   u32 x 4
//   n_samples  u64
//   per sample: sweep u32, types u32[P], switches u8[N], topics u32[N]
//   trace_len  u64, log_prob f64[trace_len]

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

#include "ptm/errors.hpp"
#include "ptm/sampler.hpp"
#include "ptm/text.hpp"

namespace ptm {

inline constexpr std::uint32_t samples_format_version = 1;
inline constexpr std::array<char, 8> samples_magic{'P', 'T', 'M', 'S', 'A', 'M', 'P', '\0'};

namespace detail {

class byte_writer {
  public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const char* p, std::size_t n) { buf_.append(p, n); }
    std::string take() { return std::move(buf_); }

  private:
    std::string buf_;
};

class byte_reader {
  public:
    explicit byte_reader(std::string_view data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string_view raw(std::size_t n) {
        need(n);
        auto v = data_.substr(pos_, n);
        pos_ += n;
        return v;
    }
    bool done() const { return pos_ == data_.size(); }

  private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw parse_error("samples file is truncated");
    }
    std::string_view data_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::string serialize_samples(const posterior_samples& ps) {
    detail::byte_writer w;
    w.raw(samples_magic.data(), samples_magic.size());
    w.u32(samples_format_version);
    const auto& hp = ps.params;
    w.u32(hp.n_topics);
    w.u32(hp.n_types);
    w.u32(ps.vocab_size);
    const std::uint64_t P = ps.samples.empty() ? 0 : ps.samples.front().types.size();
    const std::uint64_t N = ps.samples.empty() ? 0 : ps.samples.front().topics.size();
    w.u64(P);
    w.u64(N);
    w.u64(hp.seed);
    w.f64(hp.alpha);
    w.f64(hp.beta);
    w.f64(hp.h_p);
    w.f64(hp.h_t);
    w.f64(hp.gamma);
    w.u32(hp.n_sweeps);
    w.u32(hp.burn_in);
    w.u32(hp.sample_lag);
    w.u32(static_cast<std::uint32_t>(hp.kernel));
    w.u64(ps.samples.size());
    for (const auto& s : ps.samples) {
        if (s.types.size() != P || s.topics.size() != N || s.switches.size() != N)
            throw validation_error("samples have inconsistent shapes");
        w.u32(s.sweep);
        for (auto t : s.types) w.u32(t);
        for (auto v : s.switches) w.u8(static_cast<std::uint8_t>(v));
        for (auto k : s.topics) w.u32(k);
    }
    w.u64(ps.log_prob.size());
    for (double lp : ps.log_prob) w.f64(lp);
    return w.take();
}

inline posterior_samples deserialize_samples(std::string_view data) {
    detail::byte_reader r(data);
    const auto magic = r.raw(samples_magic.size());
    if (std::memcmp(magic.data(), samples_magic.data(), samples_magic.size()) != 0)
        throw parse_error("not a ptm samples file");
    const auto version = r.u32();
    if (version != samples_format_version)
        throw parse_error("unsupported samples version " + std::to_string(version));

    posterior_samples ps;
    auto& hp = ps.params;
    hp.n_topics = r.u32();
    hp.n_types = r.u32();
    ps.vocab_size = r.u32();
    const auto P = r.u64();
    const auto N = r.u64();
    hp.seed = r.u64();
    hp.alpha = r.f64();
    hp.beta = r.f64();
    hp.h_p = r.f64();
    hp.h_t = r.f64();
    hp.gamma = r.f64();
    hp.n_sweeps = r.u32();
    hp.burn_in = r.u32();
    hp.sample_lag = r.u32();
    const auto kernel = r.u32();
    if (kernel > 1) throw parse_error("unknown paragraph-type kernel id");
    hp.kernel = static_cast<type_kernel>(kernel);

    const auto n_samples = r.u64();
    ps.samples.resize(n_samples);
    for (auto& s : ps.samples) {
        s.sweep = r.u32();
        s.types.resize(P);
        for (auto& t : s.types) {
            t = r.u32();
            if (t >= hp.n_types) throw parse_error("paragraph type out of range in samples file");
        }
        s.switches.resize(N);
        for (auto& v : s.switches) {
            const auto b = r.u8();
            if (b > 1) throw parse_error("invalid switch value in samples file");
            v = static_cast<switch_value>(b);
        }
        s.topics.resize(N);
        for (auto& k : s.topics) {
            k = r.u32();
            if (k >= hp.n_topics) throw parse_error("topic out of range in samples file");
        }
    }
    ps.log_prob.resize(r.u64());
    for (auto& lp : ps.log_prob) lp = r.f64();
    if (!r.done()) throw parse_error("trailing bytes in samples file");
    return ps;
}

inline void save_samples(const std::filesystem::path& path, const posterior_samples& ps) {
    write_file(path, serialize_samples(ps));
}

inline posterior_samples load_samples(const std::filesystem::path& path) {
    return deserialize_samples(read_file(path));
}

/// "sweep,logprob" with one row per sweep.
inline std::string log_prob_csv(const posterior_samples& ps) {
    std::string out = "sweep,logprob\n";
    for (std::size_t i = 0; i < ps.log_prob.size(); ++i)
        out += std::to_string(i + 1) + "," + format_double(ps.log_prob[i]) + "\n";
    return out;
}

} // namespace ptm
