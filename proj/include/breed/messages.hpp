#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace breed {

struct MalformedMessage : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Wire protocol, little-endian. Frame = u8 tag, u32 sim_id, then a
// tag-specific payload:
//   0 HELLO        {}
//   1 SAMPLE       { u32 t, u32 n, n x f32 field }
//   2 DONE         {}
//   3 PARAM_UPDATE { 5 x f64 temps }
//   4 JOB_QUERY    {}
//   5 JOB_STATUS   { u32 k, u32 in_flight }
enum class MsgTag : std::uint8_t {
    hello = 0,
    sample = 1,
    done = 2,
    param_update = 3,
    job_query = 4,
    job_status = 5,
};

struct HelloBody {
    friend bool operator==(const HelloBody&, const HelloBody&) = default;
};
struct SampleBody {
    std::uint32_t t = 0;
    std::vector<float> field;
    friend bool operator==(const SampleBody&, const SampleBody&) = default;
};
struct DoneBody {
    friend bool operator==(const DoneBody&, const DoneBody&) = default;
};
struct ParamUpdateBody {
    std::array<double, 5> temps{};
    friend bool operator==(const ParamUpdateBody&, const ParamUpdateBody&) = default;
};
struct JobQueryBody {
    friend bool operator==(const JobQueryBody&, const JobQueryBody&) = default;
};
struct JobStatusBody {
    std::uint32_t highest_submitted = 0;  // k
    std::uint32_t in_flight = 0;
    friend bool operator==(const JobStatusBody&, const JobStatusBody&) = default;
};

struct Message {
    std::uint32_t sim_id = 0;
    std::variant<HelloBody, SampleBody, DoneBody, ParamUpdateBody, JobQueryBody, JobStatusBody>
        body;

    MsgTag tag() const { return static_cast<MsgTag>(body.index()); }

    friend bool operator==(const Message&, const Message&) = default;
};

namespace wire {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffull));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

struct Cursor {
    std::span<const std::uint8_t> buf;
    std::size_t pos = 0;

    std::uint8_t u8() {
        if (pos + 1 > buf.size()) throw MalformedMessage("truncated frame");
        return buf[pos++];
    }
    std::uint32_t u32() {
        if (pos + 4 > buf.size()) throw MalformedMessage("truncated frame");
        const std::uint32_t v = static_cast<std::uint32_t>(buf[pos]) |
                                (static_cast<std::uint32_t>(buf[pos + 1]) << 8) |
                                (static_cast<std::uint32_t>(buf[pos + 2]) << 16) |
                                (static_cast<std::uint32_t>(buf[pos + 3]) << 24);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        return lo | (static_cast<std::uint64_t>(u32()) << 32);
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
};

}  // namespace wire

inline std::vector<std::uint8_t> encode(const Message& msg) {
    std::vector<std::uint8_t> out;
    out.push_back(static_cast<std::uint8_t>(msg.tag()));
    wire::put_u32(out, msg.sim_id);
    if (const auto* s = std::get_if<SampleBody>(&msg.body)) {
        wire::put_u32(out, s->t);
        wire::put_u32(out, static_cast<std::uint32_t>(s->field.size()));
        for (float v : s->field) wire::put_u32(out, std::bit_cast<std::uint32_t>(v));
    } else if (const auto* p = std::get_if<ParamUpdateBody>(&msg.body)) {
        for (double v : p->temps) wire::put_u64(out, std::bit_cast<std::uint64_t>(v));
    } else if (const auto* j = std::get_if<JobStatusBody>(&msg.body)) {
        wire::put_u32(out, j->highest_submitted);
        wire::put_u32(out, j->in_flight);
    }
    return out;
}

// Decodes one frame from the front of the buffer; returns the message and
// the number of bytes consumed. Unknown tags and truncated frames throw
// MalformedMessage.
inline std::pair<Message, std::size_t> decode(std::span<const std::uint8_t> buf) {
    wire::Cursor c{buf};
    const std::uint8_t raw_tag = c.u8();
    if (raw_tag > static_cast<std::uint8_t>(MsgTag::job_status))
        throw MalformedMessage("unknown tag " + std::to_string(raw_tag));
    Message msg;
    msg.sim_id = c.u32();
    switch (static_cast<MsgTag>(raw_tag)) {
        case MsgTag::hello:
            msg.body = HelloBody{};
            break;
        case MsgTag::sample: {
            SampleBody s;
            s.t = c.u32();
            const std::uint32_t n = c.u32();
            s.field.reserve(n);
            for (std::uint32_t i = 0; i < n; ++i) s.field.push_back(c.f32());
            msg.body = std::move(s);
            break;
        }
        case MsgTag::done:
            msg.body = DoneBody{};
            break;
        case MsgTag::param_update: {
            ParamUpdateBody p;
            for (double& v : p.temps) v = c.f64();
            msg.body = p;
            break;
        }
        case MsgTag::job_query:
            msg.body = JobQueryBody{};
            break;
        case MsgTag::job_status: {
            JobStatusBody j;
            j.highest_submitted = c.u32();
            j.in_flight = c.u32();
            msg.body = j;
            break;
        }
    }
    return {std::move(msg), c.pos};
}

}  // namespace breed
