"use strict";
/**
 * Wire types for the local analysis service (schema_version 1).
 * Line numbers in payloads are 1-based file coordinates.
 */
Object.defineProperty(exports, "__esModule", { value: true });
//# sourceMappingURL=types.js.map