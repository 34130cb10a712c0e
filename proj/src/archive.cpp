// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "rucgan/archive.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rucgan/error.hpp"

namespace rucgan {

namespace {

class Writer {
public:
    template <class T>
    void put(const T& v) {
        raw(&v, sizeof(T));
    }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const char*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(const std::string& buf, std::size_t begin, std::size_t end) : buf_(buf), pos_(begin), end_(end) {}
    template <class T>
    T get() {
        T v;
        raw(&v, sizeof(T));
        return v;
    }
    void raw(void* p, std::size_t n) {
        if (end_ - pos_ < n) {
            throw FormatError("archive truncated");
        }
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::string str(std::size_t n) {
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    bool done() const { return pos_ == end_; }

private:
    const std::string& buf_;
    std::size_t pos_;
    std::size_t end_;
};

std::uint64_t fnv1a(const char* p, std::size_t n) {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(p[i]);
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

const Tensor* TensorArchive::find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) {
            return &t;
        }
    }
    return nullptr;
}

const Tensor& TensorArchive::get(const std::string& name) const {
    const Tensor* t = find(name);
    if (!t) {
        throw FormatError("archive has no tensor '" + name + "'");
    }
    return *t;
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
    Writer w;
    const std::string magic = archive.magic + "\n";
    w.raw(magic.data(), magic.size());
    const std::string header = archive.header.dump();
    w.put<std::uint64_t>(header.size());
    w.raw(header.data(), header.size());
    w.put<std::uint64_t>(archive.tensors.size());
    for (const auto& [name, t] : archive.tensors) {
        if (!t.materialized()) {
            throw FormatError("cannot archive unmaterialized tensor '" + name + "'");
        }
        w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
        w.raw(name.data(), name.size());
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
        for (int d : t.shape()) {
            w.put<std::int32_t>(d);
        }
        w.raw(t.ptr(), t.numel() * sizeof(double));
    }
    const std::uint64_t hash = fnv1a(w.bytes().data(), w.bytes().size());
    w.put(hash);

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw FormatError("cannot write " + tmp.string());
        }
        out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
        if (!out) {
            throw FormatError("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

TensorArchive read_archive(const std::filesystem::path& path, const std::string& expected_magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open " + path.string());
    }
    const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string magic = expected_magic + "\n";
    if (buf.compare(0, magic.size(), magic) != 0) {
        const auto nl = buf.find('\n');
        throw FormatError(path.string() + ": expected format '" + expected_magic + "', found '" +
                          buf.substr(0, std::min<std::size_t>(nl, 32)) + "'");
    }
    if (buf.size() < magic.size() + sizeof(std::uint64_t)) {
        throw FormatError(path.string() + ": archive truncated");
    }
    const std::size_t body_end = buf.size() - sizeof(std::uint64_t);
    std::uint64_t stored;
    std::memcpy(&stored, buf.data() + body_end, sizeof(stored));
    if (stored != fnv1a(buf.data(), body_end)) {
        throw FormatError(path.string() + ": checksum mismatch (corrupt archive)");
    }
    Reader r(buf, magic.size(), body_end);
    TensorArchive archive;
    archive.magic = expected_magic;
    const auto header_len = r.get<std::uint64_t>();
    try {
        archive.header = nlohmann::json::parse(r.str(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad header: " + e.what());
    }
    const auto count = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = r.get<std::uint32_t>();
        std::string name = r.str(name_len);
        const auto rank = r.get<std::uint32_t>();
        if (rank == 0 || rank > 8) {
            throw FormatError(path.string() + ": bad rank for tensor '" + name + "'");
        }
        Shape shape(rank);
        for (auto& d : shape) {
            d = r.get<std::int32_t>();
            if (d < 1) {
                throw FormatError(path.string() + ": bad dimension for tensor '" + name + "'");
            }
        }
        Tensor t(shape);
        r.raw(t.ptr(), t.numel() * sizeof(double));
        archive.tensors.emplace_back(std::move(name), std::move(t));
    }
    if (!r.done()) {
        throw FormatError(path.string() + ": trailing bytes in archive");
    }
    return archive;
}

}  // namespace rucgan
