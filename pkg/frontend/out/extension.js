"use strict";
/**
 * VS Code glue: adapts the editor-agnostic AnalysisController onto the
 * extension API.  All intelligence lives server-side; this file only
 * forwards document text, renders diagnostics/hovers, and applies repair
 * edits (which re-trigger analysis through the change event).
 */
var __createBinding = (this && this.__createBinding) || (Object.create ? (function(o, m, k, k2) {
    if (k2 === undefined) k2 = k;
    var desc = Object.getOwnPropertyDescriptor(m, k);
    if (!desc || ("get" in desc ? !m.__esModule : desc.writable || desc.configurable)) {
      desc = { enumerable: true, get: function() { return m[k]; } };
    }
    Object.defineProperty(o, k2, desc);
}) : (function(o, m, k, k2) {
    if (k2 === undefined) k2 = k;
    o[k2] = m[k];
}));
var __setModuleDefault = (this && this.__setModuleDefault) || (Object.create ? (function(o, v) {
    Object.defineProperty(o, "default", { enumerable: true, value: v });
}) : function(o, v) {
    o["default"] = v;
});
var __importStar = (this && this.__importStar) || (function () {
    var ownKeys = function(o) {
        ownKeys = Object.getOwnPropertyNames || function (o) {
            var ar = [];
            for (var k in o) if (Object.prototype.hasOwnProperty.call(o, k)) ar[ar.length] = k;
            return ar;
        };
        return ownKeys(o);
    };
    return function (mod) {
        if (mod && mod.__esModule) return mod;
        var result = {};
        if (mod != null) for (var k = ownKeys(mod), i = 0; i < k.length; i++) if (k[i] !== "default") __createBinding(result, mod, k[i]);
        __setModuleDefault(result, mod);
        return result;
    };
})();
Object.defineProperty(exports, "__esModule", { value: true });
exports.activate = activate;
exports.deactivate = deactivate;
const vscode = __importStar(require("vscode"));
const analysis_1 = require("./analysis");
const client_1 = require("./client");
function config() {
    const cfg = vscode.workspace.getConfiguration('vulnhunter');
    return {
        endpoint: cfg.get('endpoint', 'http://127.0.0.1:8725'),
        debounceMs: Math.max(500, cfg.get('debounceMs', 500)),
        languages: cfg.get('languages', ['c', 'cpp']),
    };
}
const SEVERITY = {
    error: vscode.DiagnosticSeverity.Error,
    warning: vscode.DiagnosticSeverity.Warning,
    info: vscode.DiagnosticSeverity.Information,
};
function toVscodeDiagnostic(doc, d) {
    const lineIndex = Math.max(0, Math.min(d.line - 1, doc.lineCount - 1));
    const range = doc.lineAt(lineIndex).range;
    const diag = new vscode.Diagnostic(range, d.message, SEVERITY[d.severity]);
    diag.source = 'vulnhunter';
    diag.code = d.payload.cwe_id;
    return diag;
}
function activate(context) {
    const { endpoint, debounceMs, languages } = config();
    const collection = vscode.languages.createDiagnosticCollection('vulnhunter');
    const status = vscode.window.createStatusBarItem(vscode.StatusBarAlignment.Left);
    context.subscriptions.push(collection, status);
    const docs = new Map();
    const host = {
        publishDiagnostics(uri, diagnostics) {
            const doc = docs.get(uri);
            if (!doc) {
                return;
            }
            collection.set(doc.uri, diagnostics.map((d) => toVscodeDiagnostic(doc, d)));
        },
        clearDiagnostics(uri) {
            const doc = docs.get(uri);
            if (doc) {
                collection.delete(doc.uri);
            }
        },
        setStatusWarning(message) {
            if (message) {
                status.text = `$(warning) ${message}`;
                status.show();
            }
            else {
                status.hide();
            }
        },
    };
    const controller = new analysis_1.AnalysisController(host, new client_1.ServiceClient(endpoint), debounceMs);
    context.subscriptions.push({ dispose: () => controller.dispose() });
    const relevant = (doc) => languages.includes(doc.languageId);
    const track = (doc) => {
        if (!relevant(doc)) {
            return;
        }
        docs.set(doc.uri.toString(), doc);
        controller.documentChanged(doc.uri.toString(), () => doc.getText());
    };
    context.subscriptions.push(vscode.workspace.onDidOpenTextDocument(track), vscode.workspace.onDidChangeTextDocument((e) => track(e.document)), vscode.workspace.onDidCloseTextDocument((doc) => {
        docs.delete(doc.uri.toString());
        controller.documentClosed(doc.uri.toString());
    }));
    vscode.workspace.textDocuments.forEach(track);
    const selector = languages.map((language) => ({ language, scheme: 'file' }));
    context.subscriptions.push(vscode.languages.registerHoverProvider(selector, {
        provideHover(doc, position) {
            const md = controller.hoverFor(doc.uri.toString(), position.line + 1);
            return md ? new vscode.Hover(new vscode.MarkdownString(md)) : undefined;
        },
    }));
    context.subscriptions.push(vscode.languages.registerCodeActionsProvider(selector, {
        provideCodeActions(doc, range) {
            const fix = controller.quickFixFor(doc.uri.toString(), range.start.line + 1);
            if (!fix) {
                return [];
            }
            const action = new vscode.CodeAction(fix.title, vscode.CodeActionKind.QuickFix);
            const lineIndex = fix.line - 1;
            action.edit = new vscode.WorkspaceEdit();
            action.edit.replace(doc.uri, doc.lineAt(lineIndex).range, fix.replacement);
            return [action];
        },
    }, { providedCodeActionKinds: [vscode.CodeActionKind.QuickFix] }));
}
function deactivate() { }
//# sourceMappingURL=extension.js.map