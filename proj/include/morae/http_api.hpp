#pragma once

// HTTP front end for SessionManager.
//
//   POST /sessions                       create (body: SessionRequest JSON)
//   GET  /sessions/{id}                  status
//   POST /sessions/{id}/command          {"text": "..."}
//   POST /sessions/{id}/clarification    form response, or {"confirm": bool}
//   POST /sessions/{id}/control          {"action": "pause" | "resume"}
//   GET  /sessions/{id}/events?from=N    JSON array; server-sent events when
//                                        the client accepts text/event-stream
//   GET  /sessions/{id}/trace            the JSON-lines trace

#include <httplib.h>

#include <chrono>
#include <string>

#include "morae/session.hpp"

namespace morae {

namespace http_api_detail {

inline int status_for(const std::exception& e) {
  if (dynamic_cast<const NotFoundError*>(&e)) return 404;
  if (dynamic_cast<const BusyError*>(&e) || dynamic_cast<const StateError*>(&e) ||
      dynamic_cast<const StaleFormError*>(&e))
    return 409;
  if (dynamic_cast<const ValidationError*>(&e)) return 422;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const SetupError*>(&e) || dynamic_cast<const UsageError*>(&e) ||
      dynamic_cast<const Json::exception*>(&e))
    return 400;
  if (dynamic_cast<const GatewayError*>(&e) || dynamic_cast<const ProtocolError*>(&e)) return 502;
  return 500;
}

inline std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const NotFoundError*>(&e)) return "not-found";
  if (dynamic_cast<const BusyError*>(&e)) return "busy";
  if (dynamic_cast<const StateError*>(&e)) return "state";
  if (dynamic_cast<const StaleFormError*>(&e)) return "stale-form";
  if (dynamic_cast<const ValidationError*>(&e)) return "validation";
  if (dynamic_cast<const SetupError*>(&e)) return "setup";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const Json::exception*>(&e)) return "parse";
  if (dynamic_cast<const GatewayError*>(&e)) return "gateway";
  return "internal";
}

inline void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline Json body_json(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  return Json::parse(req.body);
}

inline std::string sse_frame(const TraceEvent& e) {
  return "id: " + std::to_string(e.seq) + "\nevent: " + e.kind + "\ndata: " + to_json(e).dump() + "\n\n";
}

inline std::int64_t int_param(const httplib::Request& req, const char* name, std::int64_t fallback) {
  if (!req.has_param(name)) return fallback;
  try {
    return std::stoll(req.get_param_value(name));
  } catch (const std::exception&) {
    throw ParseError(std::string("$.") + name, std::string(name) + " must be an integer");
  }
}

inline std::int64_t from_param(const httplib::Request& req) { return std::max<std::int64_t>(0, int_param(req, "from", 0)); }

}  // namespace http_api_detail

// Registers the routes on `server`. `sessions` must outlive it.
inline void mount_api(httplib::Server& server, SessionManager& sessions) {
  using namespace http_api_detail;
  auto guarded = [](auto handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", "*");
      try {
        handler(req, res);
      } catch (const std::exception& e) {
        Json err{{"error", e.what()}, {"kind", error_kind(e)}};
        if (auto* v = dynamic_cast<const ValidationError*>(&e)) err["field"] = v->field();
        send_json(res, status_for(e), err);
      }
    };
  };

  server.Post("/sessions", guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
                auto s = sessions.create(SessionRequest::from_json(body_json(req)));
                send_json(res, 201, s->status());
              }));

  server.Get(R"(/sessions/([^/]+))", guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, sessions.get(req.matches[1])->status());
             }));

  server.Post(R"(/sessions/([^/]+)/command)",
              guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
                auto s = sessions.get(req.matches[1]);
                auto body = body_json(req);
                if (!body.contains("text") || !body["text"].is_string()) throw ParseError("$.text", "missing command text");
                auto cls = s->submit_command(body["text"].get<std::string>());
                auto st = s->status();
                st["class"] = std::string(to_string(cls));
                send_json(res, 202, st);
              }));

  server.Post(R"(/sessions/([^/]+)/clarification)",
              guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
                auto s = sessions.get(req.matches[1]);
                s->submit_clarification(body_json(req));
                send_json(res, 200, s->status());
              }));

  server.Post(R"(/sessions/([^/]+)/control)",
              guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
                auto s = sessions.get(req.matches[1]);
                auto body = body_json(req);
                std::string action;
                if (body.is_string()) action = body.get<std::string>();
                else action = body.value("action", std::string());
                s->control(action);
                send_json(res, 200, s->status());
              }));

  server.Get(R"(/sessions/([^/]+)/events)", guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
               auto s = sessions.get(req.matches[1]);
               const auto from = from_param(req);
               const bool stream = req.get_header_value("Accept").find("text/event-stream") != std::string::npos ||
                                   req.get_param_value("stream") == "1";
               if (!stream) {
                 // Polling; `wait` (ms) turns it into a long poll.
                 std::vector<TraceEvent> events;
                 if (req.has_param("wait")) {
                   const auto ms = std::clamp<std::int64_t>(int_param(req, "wait", 0), 0, 60000);
                   events = s->log().wait(from, std::chrono::milliseconds(ms));
                 } else {
                   events = s->log().since(from);
                 }
                 Json arr = Json::array();
                 for (const auto& e : events) arr.push_back(to_json(e));
                 send_json(res, 200, arr);
                 return;
               }
               auto cursor = std::make_shared<std::int64_t>(from);
               res.set_header("Cache-Control", "no-cache");
               res.set_chunked_content_provider(
                   "text/event-stream", [s, cursor](std::size_t, httplib::DataSink& sink) {
                     auto events = s->log().wait(*cursor, std::chrono::seconds(15));
                     if (events.empty()) {
                       if (s->log().closed()) {
                         sink.done();
                         return true;
                       }
                       // Heartbeat; a failed write means the client left.
                       const std::string beat = ": keep-alive\n\n";
                       return sink.write(beat.data(), beat.size());
                     }
                     for (const auto& e : events) {
                       auto frame = sse_frame(e);
                       if (!sink.write(frame.data(), frame.size())) return false;
                       *cursor = e.seq + 1;
                     }
                     return true;
                   });
             }));

  server.Get(R"(/sessions/([^/]+)/trace)", guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
               auto s = sessions.get(req.matches[1]);
               std::string out;
               for (const auto& e : s->log().since(0)) out += to_json(e).dump() + "\n";
               res.status = 200;
               res.set_content(out, "application/x-ndjson");
             }));
}

}  // namespace morae
