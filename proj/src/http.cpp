#include "markdown/service.hpp"

#include "markdown/error.hpp"

#include <httplib.h>

namespace markdown {

void serve(Service& service, const std::string& host, int port) {
    httplib::Server server;
    // Routing lives in Service::handle; every method gets the same catch-all.
    const auto forward = [&](const httplib::Request& req, httplib::Response& res) {
        const Response r = service.handle(req.method, req.target, req.body);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    const std::string any = ".*";
    server.Get(any, forward);
    server.Post(any, forward);
    server.Put(any, forward);
    server.Patch(any, forward);
    server.Delete(any, forward);
    if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace markdown
