#include "teddn/data.hpp"
#include "teddn/error.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace teddn {

namespace {

using Bytes = std::vector<unsigned char>;

Bytes read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open archive " + path);
    in.seekg(0, std::ios::end);
    Bytes buf(static_cast<size_t>(in.tellg()));
    in.seekg(0, std::ios::beg);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw FormatError("short read on archive " + path);
    return buf;
}

std::uint32_t u16(const Bytes& b, size_t off) {
    return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8);
}

std::uint32_t u32(const Bytes& b, size_t off) {
    return u16(b, off) | (u16(b, off + 2) << 16);
}

void need(const Bytes& b, size_t off, size_t len, const std::string& what) {
    if (off + len > b.size()) throw FormatError("archive truncated inside " + what);
}

struct Member {
    std::string name;
    Bytes data;
};

Bytes inflate_raw(const unsigned char* src, size_t csize, size_t usize, const std::string& name) {
    Bytes out(usize);
    z_stream strm{};
    if (inflateInit2(&strm, -MAX_WBITS) != Z_OK) throw FormatError("zlib init failed");
    strm.next_in = const_cast<Bytef*>(src);
    strm.avail_in = static_cast<uInt>(csize);
    strm.next_out = out.data();
    strm.avail_out = static_cast<uInt>(usize);
    const int rc = inflate(&strm, Z_FINISH);
    inflateEnd(&strm);
    if (rc != Z_STREAM_END) {
        throw FormatError("corrupt deflate stream in zip member " + name);
    }
    return out;
}

// Walks the central directory; sizes there are authoritative.
std::vector<Member> unzip(const Bytes& buf, const std::string& path) {
    constexpr std::uint32_t kEocd = 0x06054b50;
    constexpr std::uint32_t kCentral = 0x02014b50;
    constexpr std::uint32_t kLocal = 0x04034b50;

    if (buf.size() < 22) throw FormatError("archive " + path + " too small for a zip");
    size_t eocd = buf.size() - 22;
    const size_t low = buf.size() > (1 << 16) + 22 ? buf.size() - ((1 << 16) + 22) : 0;
    while (u32(buf, eocd) != kEocd) {
        if (eocd == low) throw FormatError("no zip end-of-central-directory in " + path);
        --eocd;
    }
    const size_t entries = u16(buf, eocd + 10);
    size_t off = u32(buf, eocd + 16);

    std::vector<Member> members;
    for (size_t e = 0; e < entries; ++e) {
        need(buf, off, 46, "central directory of " + path);
        if (u32(buf, off) != kCentral) {
            throw FormatError("bad central directory entry in " + path);
        }
        const std::uint32_t method = u16(buf, off + 10);
        const std::uint32_t csize = u32(buf, off + 20);
        const std::uint32_t usize = u32(buf, off + 24);
        const size_t name_len = u16(buf, off + 28);
        const size_t extra_len = u16(buf, off + 30);
        const size_t comment_len = u16(buf, off + 32);
        const size_t local_off = u32(buf, off + 42);
        need(buf, off + 46, name_len, "central directory of " + path);
        std::string name(reinterpret_cast<const char*>(buf.data() + off + 46), name_len);
        off += 46 + name_len + extra_len + comment_len;

        need(buf, local_off, 30, "local header of " + name);
        if (u32(buf, local_off) != kLocal) {
            throw FormatError("bad local header for zip member " + name);
        }
        const size_t lname = u16(buf, local_off + 26);
        const size_t lextra = u16(buf, local_off + 28);
        const size_t data_off = local_off + 30 + lname + lextra;
        need(buf, data_off, csize, "payload of " + name);

        Member m;
        m.name = std::move(name);
        if (method == 0) {
            if (csize != usize) throw FormatError("stored zip member " + m.name + " size mismatch");
            m.data.assign(buf.begin() + static_cast<long>(data_off),
                          buf.begin() + static_cast<long>(data_off + csize));
        } else if (method == 8) {
            m.data = inflate_raw(buf.data() + data_off, csize, usize, m.name);
        } else {
            throw FormatError("unsupported zip compression method " + std::to_string(method)
                              + " for member " + m.name);
        }
        members.push_back(std::move(m));
    }
    return members;
}

bool starts_with(const Bytes& b, const char* prefix) {
    const size_t n = std::strlen(prefix);
    return b.size() >= n && std::memcmp(b.data(), prefix, n) == 0;
}

struct NpyArray {
    std::vector<long> shape;
    std::string descr;
    size_t itemsize = 0;
    const unsigned char* payload = nullptr;
    size_t payload_bytes = 0;
};

std::string dict_value(const std::string& header, const std::string& key, const std::string& name) {
    const size_t k = header.find("'" + key + "'");
    if (k == std::string::npos) throw FormatError("npy header of " + name + " lacks '" + key + "'");
    size_t p = header.find(':', k);
    if (p == std::string::npos) throw FormatError("malformed npy header in " + name);
    ++p;
    while (p < header.size() && header[p] == ' ') ++p;
    size_t end = p;
    if (header[p] == '\'') {
        end = header.find('\'', p + 1);
        if (end == std::string::npos) throw FormatError("malformed npy header in " + name);
        return header.substr(p + 1, end - p - 1);
    }
    if (header[p] == '(') {
        end = header.find(')', p);
        if (end == std::string::npos) throw FormatError("malformed npy header in " + name);
        return header.substr(p, end - p + 1);
    }
    while (end < header.size() && header[end] != ',' && header[end] != '}') ++end;
    return header.substr(p, end - p);
}

NpyArray parse_npy(const Bytes& data, const std::string& name) {
    if (!starts_with(data, "\x93NUMPY")) {
        throw FormatError("zip member " + name + " is not an npy array");
    }
    if (data.size() < 10) throw FormatError("npy member " + name + " truncated");
    const unsigned major = data[6];
    size_t header_len = 0;
    size_t header_start = 0;
    if (major == 1) {
        header_len = u16(data, 8);
        header_start = 10;
    } else if (major == 2 || major == 3) {
        if (data.size() < 12) throw FormatError("npy member " + name + " truncated");
        header_len = u32(data, 8);
        header_start = 12;
    } else {
        throw FormatError("unsupported npy version " + std::to_string(major) + " in " + name);
    }
    if (header_start + header_len > data.size()) {
        throw FormatError("npy member " + name + " truncated in header");
    }
    const std::string header(reinterpret_cast<const char*>(data.data() + header_start), header_len);

    NpyArray arr;
    arr.descr = dict_value(header, "descr", name);
    if (arr.descr == "<f8") arr.itemsize = 8;
    else if (arr.descr == "<f4") arr.itemsize = 4;
    else if (arr.descr == "<i8") arr.itemsize = 8;
    else if (arr.descr == "<i4") arr.itemsize = 4;
    else throw FormatError("unsupported npy dtype '" + arr.descr + "' in " + name);

    const std::string order = dict_value(header, "fortran_order", name);
    if (order.find("True") != std::string::npos) {
        throw FormatError("npy member " + name + " is fortran-ordered, expected C order");
    }

    std::string shape = dict_value(header, "shape", name);
    // "(17856, 170, 3)" or "(17856,)"
    size_t pos = 1;
    while (pos < shape.size() && shape[pos] != ')') {
        while (pos < shape.size() && (shape[pos] == ' ' || shape[pos] == ',')) ++pos;
        if (pos >= shape.size() || shape[pos] == ')') break;
        size_t used = 0;
        long dim = std::stol(shape.substr(pos), &used);
        if (dim < 1) throw FormatError("npy member " + name + " has non-positive dimension");
        arr.shape.push_back(dim);
        pos += used;
    }
    if (arr.shape.empty()) throw FormatError("npy member " + name + " has empty shape");

    unsigned long long count = 1;
    for (long d : arr.shape) count *= static_cast<unsigned long long>(d);
    const unsigned long long expected = count * arr.itemsize;
    const size_t avail = data.size() - header_start - header_len;
    if (avail != expected) {
        throw FormatError("npy member " + name + " holds " + std::to_string(avail / arr.itemsize)
                          + " elements, header expects " + std::to_string(count));
    }
    arr.payload = data.data() + header_start + header_len;
    arr.payload_bytes = static_cast<size_t>(expected);
    return arr;
}

void copy_payload(const NpyArray& arr, real* dst, unsigned long long count) {
    if (arr.descr == "<f8") {
        std::vector<double> tmp(count);
        std::memcpy(tmp.data(), arr.payload, arr.payload_bytes);
        for (unsigned long long i = 0; i < count; ++i) dst[i] = static_cast<real>(tmp[i]);
    } else if (arr.descr == "<f4") {
        std::vector<float> tmp(count);
        std::memcpy(tmp.data(), arr.payload, arr.payload_bytes);
        for (unsigned long long i = 0; i < count; ++i) dst[i] = static_cast<real>(tmp[i]);
    } else if (arr.descr == "<i8") {
        std::vector<std::int64_t> tmp(count);
        std::memcpy(tmp.data(), arr.payload, arr.payload_bytes);
        for (unsigned long long i = 0; i < count; ++i) dst[i] = static_cast<real>(tmp[i]);
    } else {
        std::vector<std::int32_t> tmp(count);
        std::memcpy(tmp.data(), arr.payload, arr.payload_bytes);
        for (unsigned long long i = 0; i < count; ++i) dst[i] = static_cast<real>(tmp[i]);
    }
}

} // namespace

ConvertResult convert_archive(const std::string& archive_path, const std::string& out_dir,
                              long steps_per_day, int start_weekday) {
    const Bytes buf = read_file(archive_path);

    Bytes npy_storage;
    const Bytes* npy = nullptr;
    std::string member_name = archive_path;
    if (starts_with(buf, "\x93NUMPY")) {
        npy = &buf;
    } else {
        std::vector<Member> members = unzip(buf, archive_path);
        // prefer the conventional name, else the first rank>=2 array
        Member* chosen = nullptr;
        for (Member& m : members) {
            if (m.name == "data.npy" || m.name == "data") chosen = &m;
        }
        if (chosen == nullptr) {
            for (Member& m : members) {
                if (m.name.size() >= 4 && m.name.substr(m.name.size() - 4) == ".npy") {
                    chosen = &m;
                    break;
                }
            }
        }
        if (chosen == nullptr) {
            throw FormatError("archive " + archive_path + " contains no npy member");
        }
        member_name = chosen->name;
        npy_storage = std::move(chosen->data);
        npy = &npy_storage;
    }

    const NpyArray arr = parse_npy(*npy, member_name);
    if (arr.shape.size() != 2 && arr.shape.size() != 3) {
        throw FormatError("npy member " + member_name + " has rank "
                          + std::to_string(arr.shape.size()) + ", expected (T, N) or (T, N, C)");
    }

    TrafficSeries series;
    series.steps_per_day = steps_per_day;
    series.start_weekday = start_weekday;
    const long t = arr.shape[0];
    const long n = arr.shape[1];
    const long c = arr.shape.size() == 3 ? arr.shape[2] : 1;
    series.values = Tensor::zeros({t, n, c});
    copy_payload(arr, series.values.data(), static_cast<unsigned long long>(t) * n * c);
    check_finite(series.values, "converted series");

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::string stem = fs::path(archive_path).stem().string();
    if (stem.empty()) stem = "data";

    ConvertResult result;
    result.steps = t;
    result.nodes = n;
    result.channels = c;
    result.payload_path = (fs::path(out_dir) / (stem + ".bin")).string();
    result.sidecar_path = result.payload_path + ".json";
    save_flatbin(series, result.payload_path);
    return result;
}

} // namespace teddn
