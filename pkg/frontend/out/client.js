"use strict";
/**
 * HTTP client for the local analysis service.
 *
 * 422 responses carry full results (truncated-function analyses) and are
 * treated as success; anything else non-2xx, timeouts, and connection
 * failures surface as ServiceUnavailableError so the caller can degrade
 * gracefully.
 */
Object.defineProperty(exports, "__esModule", { value: true });
exports.ServiceClient = exports.ServiceUnavailableError = void 0;
class ServiceUnavailableError extends Error {
    constructor(message) {
        super(message);
        this.name = 'ServiceUnavailableError';
    }
}
exports.ServiceUnavailableError = ServiceUnavailableError;
class ServiceClient {
    endpoint;
    timeoutMs;
    constructor(endpoint, timeoutMs = 10_000) {
        this.endpoint = endpoint;
        this.timeoutMs = timeoutMs;
    }
    async request(path, init) {
        const controller = new AbortController();
        const timer = setTimeout(() => controller.abort(), this.timeoutMs);
        try {
            return await fetch(`${this.endpoint}${path}`, { ...init, signal: controller.signal });
        }
        catch (err) {
            throw new ServiceUnavailableError(`analysis service unreachable at ${this.endpoint}: ${String(err)}`);
        }
        finally {
            clearTimeout(timer);
        }
    }
    async health() {
        const res = await this.request('/v1/health');
        return (await res.json());
    }
    async analyzeFileText(fileText, file) {
        const res = await this.request('/v1/analyze', {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify({ file_text: fileText, file }),
        });
        if (!res.ok && res.status !== 422) {
            throw new ServiceUnavailableError(`analysis service returned ${res.status}`);
        }
        return (await res.json());
    }
}
exports.ServiceClient = ServiceClient;
//# sourceMappingURL=client.js.map