"""Command line frontend over a configured archive connection.

Exit codes: 0 success, 1 operation error (message on stderr, stdout left
empty), 2 usage error.  Output is line-oriented or CSV so it composes in
pipelines; ``--json`` switches listing commands to JSON.
"""

from __future__ import annotations

import functools
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor, as_completed

import click

from . import Interface, default_cache_dir
from .errors import RestArchError
from .mapper import CollectionHandle, ElementHandle
from .mockxnat import MockXnat, default_fixture, load_fixture


def guard(fn):
    """Map operation failures to exit code 1 with the message on stderr."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except RestArchError as exc:
            click.echo(str(exc), err=True)
            sys.exit(1)

    return wrapper


def _parse_criteria_json(raw: str):
    try:
        return json.loads(raw)
    except ValueError as exc:
        raise click.UsageError(f"--where must be JSON criteria: {exc}") from exc


@click.group()
@click.option("--url", envvar="RESTARCH_URL", required=True,
              help="Archive base URL (env: RESTARCH_URL).")
@click.option("--user", envvar="RESTARCH_USER", default=None,
              help="Login (env: RESTARCH_USER).")
@click.option("--password", envvar="RESTARCH_PASS", default=None,
              help="Password (env: RESTARCH_PASS).")
@click.option("--cache-dir", envvar="RESTARCH_CACHE_DIR", default=None,
              help="Cache directory (env: RESTARCH_CACHE_DIR).")
@click.option("--offline", is_flag=True, help="Serve everything from the cache.")
@click.option("--timeout", type=float, default=30.0, show_default=True)
@click.option("--anonymous", is_flag=True, help="Never prompt for credentials.")
@click.pass_context
def main(ctx, url, user, password, cache_dir, offline, timeout, anonymous):
    """Query, download from, and administer a REST archive."""
    if user is None and not anonymous and sys.stdin.isatty():
        user = click.prompt("login", default="", show_default=False) or None
        if user:
            password = click.prompt("password", hide_input=True, default="",
                                    show_default=False)
    ctx.obj = {
        "url": url,
        "user": user,
        "password": password,
        "cache_dir": cache_dir or default_cache_dir(url),
        "offline": offline,
        "timeout": timeout,
    }


def _connect(ctx) -> Interface:
    cfg = ctx.obj
    iface = Interface(
        cfg["url"],
        user=cfg["user"],
        password=cfg["password"],
        cachedir=cfg["cache_dir"],
        offline=cfg["offline"],
        timeout=cfg["timeout"],
    )
    ctx.call_on_close(iface.close)
    return iface


def _relative_layout(handle: ElementHandle) -> str:
    return os.path.join(*[pattern for _, pattern in handle.path.segments])


def _download(handles, out_dir: str, jobs: int) -> list[str]:
    paths = []
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [
            pool.submit(h.get_file, os.path.join(out_dir, _relative_layout(h)))
            for h in handles
        ]
        for future in as_completed(futures):
            paths.append(future.result())
    return sorted(paths)


@main.command("select")
@click.argument("path")
@click.option("--where", "criteria_json", default=None,
              help="JSON nested-list criteria for search-filtered traversal.")
@click.option("--format", "fmt", type=click.Choice(["lines", "csv", "json"]),
              default="lines", show_default=True)
@click.option("--out", "out_dir", default=None,
              help="Download matched files into DIR, preserving the archive layout.")
@click.option("--jobs", type=int, default=os.cpu_count() or 2, show_default=True,
              help="Concurrent download workers.")
@click.option("--offline", is_flag=True, help="Serve everything from the cache.")
@click.pass_context
@guard
def cli_select(ctx, path, criteria_json, fmt, out_dir, jobs, offline):
    """Resolve a selector: list identifiers or download file elements."""
    if offline:
        ctx.obj["offline"] = True
    iface = _connect(ctx)
    handle = iface.select(path)

    if isinstance(handle, ElementHandle):
        if out_dir is None:
            click.echo(handle.id)
            return
        if handle.level != "files":
            raise click.UsageError("--out applies to file elements only")
        click.echo(handle.get_file(os.path.join(out_dir, _relative_layout(handle))))
        return

    collection: CollectionHandle = handle
    if criteria_json is not None:
        collection = collection.where(_parse_criteria_json(criteria_json))

    if out_dir is not None:
        if collection.path.final_level != "files":
            raise click.UsageError("--out applies to file collections only")
        for downloaded in _download(list(collection), out_dir, jobs):
            click.echo(downloaded)
        return

    elements = list(collection)
    if fmt == "lines":
        for element in elements:
            click.echo(element.id)
    elif fmt == "csv":
        click.echo("ID,label")
        for element in elements:
            click.echo(f"{element.id},{element.label()}")
    else:
        click.echo(json.dumps({
            "result": [{"ID": e.id, "label": e.label()} for e in elements]
        }))


@main.group("search")
def cli_search():
    """Run, save, and template searches."""


def _columns_option(fn):
    return click.option("--columns", required=True,
                        help="Comma-separated schema fields.")(fn)


@cli_search.command("run")
@click.option("--row", required=True, help="Datatype rendered per row.")
@_columns_option
@click.option("--where", "criteria_json", required=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
@click.pass_context
@guard
def search_run(ctx, row, columns, criteria_json, fmt):
    """POST a query and print the result table."""
    iface = _connect(ctx)
    table = iface.select(row, columns.split(",")).where(
        _parse_criteria_json(criteria_json), format=fmt
    )
    click.echo(table.to_json() if fmt == "json" else table.to_csv(), nl=False)


@cli_search.command("save")
@click.argument("name")
@click.option("--row", required=True)
@_columns_option
@click.option("--where", "criteria_json", required=True)
@click.option("--share", default="", help="Comma-separated users to share with.")
@click.pass_context
@guard
def search_save(ctx, name, row, columns, criteria_json, share):
    """Store a query server-side."""
    iface = _connect(ctx)
    iface.manage.search.save(
        name, row, columns.split(","), _parse_criteria_json(criteria_json),
        shared_with=[u for u in share.split(",") if u],
    )


@cli_search.command("get")
@click.argument("name")
@click.pass_context
@guard
def search_get(ctx, name):
    """Print a stored query as its XML document."""
    iface = _connect(ctx)
    spec = iface.manage.search.get(name)
    from .search import to_xml

    click.echo(to_xml(spec).decode("utf-8"))


@cli_search.command("save-template")
@click.argument("name")
@click.option("--row", required=True)
@_columns_option
@click.option("--where", "criteria_json", required=True,
              help="Criteria whose values are placeholder keys.")
@click.option("--share", default="")
@click.pass_context
@guard
def search_save_template(ctx, name, row, columns, criteria_json, share):
    """Store a reusable query with placeholder values."""
    iface = _connect(ctx)
    iface.manage.search.save_template(
        name, row, columns.split(","), _parse_criteria_json(criteria_json),
        shared_with=[u for u in share.split(",") if u],
    )


@cli_search.command("use-template")
@click.argument("name")
@click.option("--bind", multiple=True, help="key=value placeholder binding.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@click.pass_context
@guard
def search_use_template(ctx, name, bind, fmt):
    """Fill a template's placeholders and run it."""
    bindings = {}
    for pair in bind:
        key, sep, value = pair.partition("=")
        if not sep:
            raise click.UsageError(f"--bind needs key=value, got {pair!r}")
        bindings[key] = value
    iface = _connect(ctx)
    table = iface.manage.search.use_template(name, bindings, format=fmt)
    click.echo(table.to_json() if fmt == "json" else table.to_csv(), nl=False)


@main.group("inspect")
def cli_inspect():
    """Explore the archive's datatypes, fields, and values."""


@cli_inspect.command("datatypes")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
@guard
def inspect_datatypes(ctx, as_json):
    names = _connect(ctx).inspect.datatypes()
    click.echo(json.dumps(names) if as_json else "\n".join(names))


@cli_inspect.command("fields")
@click.argument("datatype")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
@guard
def inspect_fields(ctx, datatype, as_json):
    names = _connect(ctx).inspect.fields(datatype)
    click.echo(json.dumps(names) if as_json else "\n".join(names))


@cli_inspect.command("values")
@click.argument("field")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
@guard
def inspect_values(ctx, field, as_json):
    values = _connect(ctx).inspect.field_values(field)
    click.echo(json.dumps(values) if as_json else "\n".join(values))


@main.group("manage")
def cli_manage():
    """Project accessibility and membership."""


@cli_manage.command("access")
@click.argument("project")
@click.argument("level", required=False)
@click.pass_context
@guard
def manage_access(ctx, project, level):
    """Print a project's accessibility, or set it when LEVEL is given."""
    admin = _connect(ctx).manage.project(project)
    if level is None:
        click.echo(admin.get_accessibility())
    else:
        admin.set_accessibility(level)


@cli_manage.group("user")
def manage_user():
    """Membership operations."""


@manage_user.command("add")
@click.argument("project")
@click.argument("user")
@click.argument("role")
@click.pass_context
@guard
def user_add(ctx, project, user, role):
    _connect(ctx).manage.project(project).add_user(user, role)


@manage_user.command("remove")
@click.argument("project")
@click.argument("user")
@click.pass_context
@guard
def user_remove(ctx, project, user):
    _connect(ctx).manage.project(project).remove_user(user)


@manage_user.command("list")
@click.argument("project")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
@guard
def user_list(ctx, project, as_json):
    members = _connect(ctx).manage.project(project).users()
    if as_json:
        click.echo(json.dumps(members))
    else:
        for login, role in sorted(members.items()):
            click.echo(f"{login} {role}")


@main.group("cache")
def cli_cache():
    """Local response cache maintenance."""


@cli_cache.command("clear")
@click.option("--prefix", default=None, help="Only keys starting with this prefix.")
@click.pass_context
@guard
def cache_clear(ctx, prefix):
    """Remove cached entries; prints how many were removed."""
    iface = _connect(ctx)
    click.echo(str(iface.cache.clear(prefix=prefix)))


@cli_cache.command("status")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
@guard
def cache_status(ctx, as_json):
    iface = _connect(ctx)
    count = iface.cache.entry_count()
    click.echo(json.dumps({"entries": count}) if as_json else f"entries: {count}")


@click.group()
def mock_main():
    """Run the embedded mock archive server."""


@mock_main.command("serve")
@click.argument("fixture")
@click.option("--port", type=int, default=0, show_default="ephemeral")
@guard
def mock_serve(fixture, port):
    """Serve FIXTURE (a fixture JSON path, or 'default') over HTTP."""
    archive = default_fixture() if fixture == "default" else load_fixture(fixture)
    server = MockXnat(archive, port=port).start()
    click.echo(f"serving {server.url}")
    sys.stdout.flush()
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()


if __name__ == "__main__":
    main()
