"""HTTP facade: every route funnels through the gateway.

Error responses are JSON {stage, message, retryAfter?}; throttled requests
come back 429 with the backoff the caller should honor. Job payloads use the
archive's attribute names so the browser client and tests share one
contract.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import analytics as analytics_mod
from . import store as store_mod
from .adapter import InvalidParams, SubmitSpec, validate_submit_spec
from .auth import AuthError, AuthProvider, SessionStore
from .config import AnalyticsConfig
from .gateway import (
    DispatchError,
    JobRequest,
    RequestGateway,
    RequestKind,
    Throttled,
    record_to_json,
)
from .poller import StatusPoller
from .store import JobStore

_WARNING_RE = re.compile(r"\bwarn(?:ing)?\b", re.IGNORECASE)
_ERROR_RE = re.compile(r"\berror\b", re.IGNORECASE)

_STAGE_HTTP_STATUS = {
    "Render": 400,
    "Store": 404,
    "Transport": 502,
    "Parse": 502,
}


class ApiError(Exception):
    def __init__(self, status_code: int, stage: str, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.status_code = status_code
        self.stage = stage
        self.message = message
        self.retry_after = retry_after


@dataclass
class ApiContext:
    gateway: RequestGateway
    store: JobStore
    sessions: SessionStore
    providers: dict[str, AuthProvider]
    poller: StatusPoller | None = None
    admin_users: set[str] = field(default_factory=set)
    analytics: AnalyticsConfig = field(default_factory=AnalyticsConfig)
    tag_rules: list[analytics_mod.TagRule] = field(default_factory=list)

    def is_admin(self, principal: str) -> bool:
        return principal in self.admin_users


class LoginBody(BaseModel):
    user: str = ""
    token: str = ""
    assertion: str = ""
    provider: str = ""


class SubmitBody(BaseModel):
    jobName: str
    scriptPath: str
    sourceDirectory: str
    memoryRequested: str = "1G"
    cores: int = 1
    parallel: bool = False
    outputPath: str = ""
    extraArgs: list[str] = Field(default_factory=list)

    def to_spec(self) -> SubmitSpec:
        return SubmitSpec(
            job_name=self.jobName,
            script_path=self.scriptPath,
            source_directory=self.sourceDirectory,
            memory_requested=self.memoryRequested,
            cores=self.cores,
            parallel=self.parallel,
            output_path=self.outputPath,
            extra_args=tuple(self.extraArgs),
        )


def scan_log_lines(lines: list[str]) -> list[dict]:
    """Keyword findings over error-log lines, in file order.

    A line matching both patterns counts as an Error; line numbers are
    1-based within the scanned window.
    """
    findings = []
    for index, text in enumerate(lines, start=1):
        if _ERROR_RE.search(text):
            findings.append({"severity": "Error", "line": index, "text": text})
        elif _WARNING_RE.search(text):
            findings.append({"severity": "Warning", "line": index, "text": text})
    return findings


def create_app(ctx: ApiContext) -> FastAPI:
    app = FastAPI(title="gridscope", docs_url=None, redoc_url=None)

    def bearer_session(authorization: str = Header(default="")):
        if not authorization.startswith("Bearer "):
            raise ApiError(401, "Auth", "missing bearer token")
        try:
            return ctx.sessions.validate(authorization[len("Bearer ") :])
        except AuthError as exc:
            raise ApiError(401, "Auth", str(exc)) from exc

    def run(request: JobRequest) -> tuple[dict, bool, float | None]:
        try:
            return ctx.gateway.handle(request)
        except Throttled as exc:
            raise ApiError(429, "Throttle", "over request budget", exc.retry_after) from exc
        except DispatchError as exc:
            status = _STAGE_HTTP_STATUS.get(exc.stage, 500)
            raise ApiError(status, exc.stage, exc.stage_message) from exc

    def now() -> float:
        return ctx.gateway.clock()

    def visible(record, principal: str) -> bool:
        return ctx.is_admin(principal) or record.user == principal

    @app.exception_handler(ApiError)
    async def on_api_error(_request: Request, exc: ApiError) -> JSONResponse:
        body = {"stage": exc.stage, "message": exc.message}
        if exc.retry_after is not None:
            body["retryAfter"] = exc.retry_after
        return JSONResponse(status_code=exc.status_code, content=body)

    @app.post("/auth/login")
    def login(body: LoginBody):
        name = body.provider or ("assertion" if body.assertion else "local")
        provider = ctx.providers.get(name)
        if provider is None:
            raise ApiError(503, "Auth", f"provider {name!r} not configured")
        try:
            principal = provider.authenticate(body.model_dump())
        except AuthError as exc:
            raise ApiError(401, "Auth", str(exc)) from exc
        session = ctx.sessions.issue(principal)
        return {
            "token": session.token,
            "principal": session.principal,
            "issuedAt": _iso(session.issued_at),
            "expiresAt": _iso(session.expires_at),
        }

    @app.get("/jobs")
    def list_jobs(
        session=Depends(bearer_session),
        user: str = Query(default=""),
        status: str = Query(default=""),
    ):
        principal = session.principal
        if ctx.is_admin(principal):
            scope = user or None
        else:
            scope = principal  # non-admins only ever see their own jobs
        payload, cached, cached_at = run(
            JobRequest(
                principal=principal,
                kind=RequestKind.Status,
                params={"user": scope},
                issued_at=now(),
            )
        )
        jobs = payload["jobs"]
        if status:
            jobs = [j for j in jobs if j["status"] == status]
        return {"jobs": jobs, "cached": cached, "cachedAt": _iso_or_none(cached_at)}

    @app.get("/jobs/{job_id}")
    def job_detail(
        job_id: int,
        session=Depends(bearer_session),
        lines: int = Query(default=10, ge=1, le=1000),
    ):
        principal = session.principal
        record = _get_visible_record(job_id, principal)
        script_content = ""
        output_tail: list[str] = []
        error_lines: list[str] = []
        cached = False
        if record.path:
            try:
                payload, was_cached, _ = run(
                    JobRequest(
                        principal=principal,
                        kind=RequestKind.Output,
                        params={"job_id": job_id, "what": "script"},
                        issued_at=now(),
                    )
                )
                script_content = payload["content"]
                cached = cached or was_cached
            except ApiError as exc:
                # a cleaned-up script should not take down the whole screen
                if exc.stage != "Transport":
                    raise
        if record.outpath or ctx.gateway.job_paths.get(job_id, {}).get("stdout"):
            payload, was_cached, _ = run(
                JobRequest(
                    principal=principal,
                    kind=RequestKind.Output,
                    params={"job_id": job_id, "what": "tail_errors", "lines": lines},
                    issued_at=now(),
                )
            )
            output_tail = payload["lines"]
            error_lines = payload.get("errorLines", [])
            cached = cached or was_cached
        return {
            "record": record_to_json(record),
            "scriptContent": script_content,
            "outputTail": output_tail,
            "logFindings": scan_log_lines(error_lines),
            "cached": cached,
        }

    @app.get("/jobs/{job_id}/output")
    def job_output(
        job_id: int,
        session=Depends(bearer_session),
        lines: int = Query(default=10, ge=1, le=1000),
    ):
        principal = session.principal
        _get_visible_record(job_id, principal)
        payload, cached, cached_at = run(
            JobRequest(
                principal=principal,
                kind=RequestKind.Output,
                params={"job_id": job_id, "what": "tail", "lines": lines},
                issued_at=now(),
            )
        )
        return {"lines": payload["lines"], "cached": cached, "cachedAt": _iso_or_none(cached_at)}

    @app.get("/jobs/{job_id}/logs")
    def job_logs(job_id: int, session=Depends(bearer_session)):
        principal = session.principal
        _get_visible_record(job_id, principal)
        payload, cached, _ = run(
            JobRequest(
                principal=principal,
                kind=RequestKind.Output,
                params={"job_id": job_id, "what": "errors"},
                issued_at=now(),
            )
        )
        return {"findings": scan_log_lines(payload["lines"]), "cached": cached}

    @app.post("/jobs", status_code=201)
    def submit_job(body: SubmitBody, session=Depends(bearer_session)):
        spec = body.to_spec()
        try:
            validate_submit_spec(spec)
        except InvalidParams as exc:
            raise ApiError(400, "Validation", str(exc)) from exc
        payload, _, _ = run(
            JobRequest(
                principal=session.principal,
                kind=RequestKind.Submit,
                params={"spec": spec},
                issued_at=now(),
            )
        )
        return payload

    @app.delete("/jobs/{job_id}")
    def cancel_job(job_id: int, session=Depends(bearer_session)):
        principal = session.principal
        _get_visible_record(job_id, principal)
        payload, _, _ = run(
            JobRequest(
                principal=principal,
                kind=RequestKind.Cancel,
                params={"job_id": job_id},
                issued_at=now(),
            )
        )
        return payload

    @app.post("/refresh")
    def refresh(session=Depends(bearer_session)):
        principal = session.principal
        payload, _, _ = run(
            JobRequest(
                principal=principal,
                kind=RequestKind.Refresh,
                params={"user": principal},
                issued_at=now(),
            )
        )
        return payload

    @app.get("/predict")
    def predict_route(
        session=Depends(bearer_session),
        tool: str = Query(...),
        reads: float = Query(...),
        metric: str = Query(default="elapsed_seconds"),
    ):
        try:
            metric_enum = analytics_mod.Metric(metric)
        except ValueError as exc:
            raise ApiError(400, "Validation", f"unknown metric {metric!r}") from exc
        report = analytics_mod.build_models(
            ctx.store,
            ctx.tag_rules,
            grouping=ctx.analytics.group_keys,
            covariate_key=ctx.analytics.covariate_key,
        )
        wanted = {key: tool for key in ctx.analytics.group_keys}
        model = next(
            (m for m in report.models if m.tag_filter == wanted and m.metric is metric_enum),
            None,
        )
        if model is None:
            raise ApiError(404, "Model", f"no fitted model for {wanted} {metric}")
        estimate = analytics_mod.predict(model, reads)
        return {
            "tool": tool,
            "metric": metric_enum.value,
            "covariate": reads,
            "value": estimate["value"],
            "rmse": estimate["rmse"],
            "n": model.n,
            "slope": model.slope,
            "intercept": model.intercept,
        }

    @app.get("/diagnostics")
    def diagnostics(session=Depends(bearer_session)):
        report = None
        if ctx.poller is not None and ctx.poller.last_report is not None:
            report = ctx.poller.last_report.to_json()
        return {"poll": report, "gateway": ctx.gateway.diagnostics()}

    def _get_visible_record(job_id: int, principal: str):
        try:
            record = ctx.store.get_job(job_id)
        except store_mod.NotFound as exc:
            raise ApiError(404, "Store", f"job {job_id} not found") from exc
        if not visible(record, principal):
            raise ApiError(403, "Forbidden", f"job {job_id} belongs to another user")
        return record

    return app


def _iso(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()


def _iso_or_none(ts: float | None) -> str | None:
    return None if ts is None else _iso(ts)
