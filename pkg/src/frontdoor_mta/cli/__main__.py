from frontdoor_mta.cli import app

app()
