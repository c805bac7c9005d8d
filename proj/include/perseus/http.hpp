#pragma once

#include <charconv>
#include <optional>
#include <string>

#include <httplib.h>

#include "perseus/service.hpp"

namespace perseus {

namespace detail {

template <typename Fn>
void respond(httplib::Response& res, Fn&& fn) {
  try {
    const nlohmann::ordered_json body = fn();
    res.status = 200;
    res.set_content(body.dump(2) + "\n", "application/json");
    return;
  } catch (const HttpError& e) {
    res.status = e.status;
    nlohmann::ordered_json err;
    err["error"] = e.what();
    res.set_content(err.dump(2) + "\n", "application/json");
  } catch (const std::invalid_argument& e) {
    res.status = 422;
    nlohmann::ordered_json err;
    err["error"] = e.what();
    res.set_content(err.dump(2) + "\n", "application/json");
  } catch (const std::exception& e) {
    res.status = 500;
    nlohmann::ordered_json err;
    err["error"] = e.what();
    res.set_content(err.dump(2) + "\n", "application/json");
  }
}

inline nlohmann::json parse_body(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw HttpError(422, "malformed JSON body");
  return j;
}

}  // namespace detail

inline void attach_routes(httplib::Server& server, JobManager& manager) {
  server.Post("/jobs", [&manager](const httplib::Request& req, httplib::Response& res) {
    detail::respond(res, [&]() -> nlohmann::ordered_json {
      const std::string id = manager.submit(detail::parse_body(req.body));
      nlohmann::ordered_json out;
      out["id"] = id;
      out["state"] = manager.state_of(id);
      return out;
    });
  });

  server.Get(R"(/jobs/([^/]+)/schedule)",
             [&manager](const httplib::Request& req, httplib::Response& res) {
               detail::respond(res, [&]() -> nlohmann::ordered_json {
                 std::optional<std::int64_t> t;
                 if (req.has_param("straggler_time_us")) {
                   const std::string raw = req.get_param_value("straggler_time_us");
                   std::int64_t value = 0;
                   const auto [ptr, ec] =
                       std::from_chars(raw.data(), raw.data() + raw.size(), value);
                   if (ec != std::errc() || ptr != raw.data() + raw.size())
                     throw HttpError(422, "straggler_time_us must be an integer");
                   t = value;
                 }
                 return manager.schedule_response(req.matches[1], t);
               });
             });

  server.Post(R"(/jobs/([^/]+)/straggler)",
              [&manager](const httplib::Request& req, httplib::Response& res) {
                detail::respond(res, [&]() -> nlohmann::ordered_json {
                  return manager.straggler(req.matches[1], detail::parse_body(req.body));
                });
              });
}

}  // namespace perseus
