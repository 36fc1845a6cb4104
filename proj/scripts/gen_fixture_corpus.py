#!/usr/bin/env python3
"""Generate the synthetic page corpus under data/corpus/.

100 small offline HTML pages with known ground truth: exactly 40 are usable
as unwitting senders (a visible text field that advertises taking an email
address, on a page without a human check). labels.tsv records per page
whether a captcha guards it and whether it is genuinely usable.

Deterministic: rerunning reproduces byte-identical output.
"""

import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "corpus"

rng = random.Random(20260819)

TOPICS = [
    "alpine hiking", "sourdough baking", "retro computing", "birdwatching",
    "urban gardening", "chess openings", "vintage synths", "trail running",
    "fountain pens", "astrophotography", "home brewing", "origami",
    "marine biology", "typography", "beekeeping", "kayaking",
]

FILLER = (
    "Lorem ipsum dolor sit amet, consectetur adipiscing elit. "
    "Sed do eiusmod tempor incididunt ut labore et dolore magna aliqua. "
    "Ut enim ad minim veniam, quis nostrud exercitation ullamco laboris. "
    "Duis aute irure dolor in reprehenderit in voluptate velit esse. "
).split(". ")


def para(n=2):
    return "\n".join(f"<p>{rng.choice(FILLER)}.</p>" for _ in range(n))


def page(title, body):
    return (
        "<html>\n<head><title>%s</title></head>\n<body>\n<h1>%s</h1>\n%s\n</body>\n</html>\n"
        % (title, title, body)
    )


# ---------------------------------------------------------------- suitable --

def newsletter(i):
    topic = rng.choice(TOPICS)
    action = rng.choice(["newsletter.php", "subscribe.cgi", "list.pl", "join.asp", "signup.py"])
    field = rng.choice(["email", "Email", "e-mail", "subscriber_email", "your_email"])
    hint = rng.choice(["your email here!", "", "you@example.com", ""])
    extras = ""
    if rng.random() < 0.5:
        extras += '<input type="hidden" name="list" value="%s">\n' % topic.replace(" ", "-")
    if rng.random() < 0.4:
        extras += ('<select name="format"><option value="html">HTML</option>'
                   "<option>plain text</option></select>\n")
    if rng.random() < 0.3:
        extras += '<input type="checkbox" name="offers" value="yes"> send me offers\n'
    body = para() + (
        '\n<form action="%s" method=post>\n'
        'Email: <input type="text" name="%s" value="%s" size=30>\n%s'
        '<input type="submit" name="submit" value="%s">\n</form>\n'
    ) % (action, field, hint, extras, rng.choice(["submit", "Subscribe", "Join", "Sign up"]))
    return page("The %s weekly" % topic, body), False, True


def fig_newsletter(i):
    # Minimal mailing-list box: one address field, one submit.
    body = (
        '<form action="newsletter.php" method=post>\n'
        'Email: <input type="text" name="email" value="your email here!" size=30>\n'
        '<input type="submit" name="submit" value="submit">\n'
        "</form>\n"
    )
    return page("Newsletter", body), False, True


def malformed(i):
    kind = i % 6
    topic = rng.choice(TOPICS)
    if kind == 0:  # unclosed form, file just ends mid-markup
        body = para() + '\n<form action=join.cgi method=post>\n<input type=text name=email value="">'
        full = page(topic, body)
        return full[: full.rfind("</body>")], False, True
    if kind == 1:  # uppercase everything
        body = ('<FORM ACTION="SUB.CGI" METHOD=POST>\n'
                "<INPUT TYPE=TEXT NAME=EMAIL>\n<INPUT TYPE=SUBMIT NAME=GO VALUE=OK>\n</FORM>\n")
        return page(topic.upper(), para() + body), False, True
    if kind == 2:  # single quotes
        body = ("<form action='ml.php' method='post'>\n"
                "<input type='text' name='email' value='your address'>\n"
                "<input type='submit' name='s' value='go'>\n</form>\n")
        return page(topic, para() + body), False, True
    if kind == 3:  # unquoted attribute values
        body = ("<form action=subscribe.cgi method=post>\n"
                "<input type=text name=email size=25>\n<input type=submit name=b value=join>\n"
                "</form>\n")
        return page(topic, para() + body), False, True
    if kind == 4:  # stray '<' in prose before the form
        body = ("<p>for lists where size < 100 we recommend weekly digests</p>\n"
                '<form action="digest.pl"><input name="email"></form>\n')
        return page(topic, body), False, True
    # kind 5: a broken tag after the fields swallows the closing </form>
    body = ('<form action="go.cgi" method=post>\n'
            '<input type="text" name="email" value="your email here!">\n'
            "<input type=submit name=ok value=ok>\n"
            "<p class=note Thanks for joining our list\n</form>\n")
    return page(topic, para() + body), False, True


def default_text(i):
    # Neutral field name; only the default text gives it away.
    name = rng.choice(["addr", "recipient", "box1", "field7"])
    hint = rng.choice(["enter your e-mail", "Enter email address", "your e-mail here"])
    body = para() + (
        '\n<form action="notify.cgi" method=get>\n'
        '<input type="text" name="%s" value="%s">\n'
        '<input type="submit" name="n" value="Notify me">\n</form>\n' % (name, hint)
    )
    return page("Product updates", body), False, True


def multi_form_suitable(i):
    topic = rng.choice(TOPICS)
    body = (
        '<form action="find.cgi" method=get><input type="text" name="q">'
        '<input type="submit" name="s" value="Search"></form>\n' + para() +
        '\n<form action="weekly.php" method=post>\n'
        'Get our digest: <input type="text" name="email" value="">\n'
        '<input type="submit" name="join" value="Join">\n</form>\n'
    )
    return page("All about %s" % topic, body), False, True


def contact(i):
    body = para() + (
        '\n<form action="contact.php" method=post>\n'
        '<input type="text" name="fullname">\n'
        '<input type="text" name="email">\n'
        '<input type="text" name="phone">\n'
        '<textarea name="msg">how can we help?</textarea>\n'
        '<input type="submit" name="send" value="Send">\n</form>\n'
    )
    return page("Contact us", body), False, True


def signup(i):
    body = para(1) + (
        '\n<form action="register.cgi" method=post>\n'
        '<input type="text" name="username">\n'
        '<input type="text" name="email">\n'
        '<input type="password" name="password">\n'
        '<input type="password" name="password2">\n'
        '<input type="submit" name="create" value="Create account">\n</form>\n'
    )
    return page("Create an account", body), False, True


# -------------------------------------------------------------- unsuitable --

def article(i):
    return page("Notes on %s" % rng.choice(TOPICS), para(5)), False, False


def search_only(i):
    body = ('<form action="search.cgi" method=get>\n'
            '<input type="search" name="q" value="">\n'
            '<input type="submit" name="go" value="Find">\n</form>\n' + para())
    return page("Search the %s archive" % rng.choice(TOPICS), body), False, False


def login(i):
    body = ('<form action="auth.cgi" method=post>\n'
            '<input type="text" name="username">\n'
            '<input type="password" name="password">\n'
            '<input type="checkbox" name="remember" value="1"> remember me\n'
            '<input type="submit" name="log" value="Log in">\n</form>\n')
    return page("Members area", body), False, False


def captcha_guarded(i):
    # A perfectly good address form, but the page carries a human check.
    body = para(1) + (
        '\n<form action="request.php" method=post>\n'
        '<input type="text" name="email" value="">\n'
        '<img src="captcha.png" alt="type the letters shown">\n'
        '<input type="text" name="captcha_code">\n'
        '<input type="submit" name="req" value="Request invite">\n</form>\n'
    )
    return page("Invite request", body), True, False


def hidden_email_only(i):
    body = ('<form action="track.cgi" method=get>\n'
            '<input type="hidden" name="owner_email" value="ops@site.example">\n'
            '<input type="text" name="parcel_id">\n'
            '<input type="submit" name="t" value="Track">\n</form>\n' + para())
    return page("Parcel tracking", body), False, False


def mailto_only(i):
    body = para(3) + '\n<p>Questions? <a href="mailto:info@club.example">Write to us</a>.</p>\n'
    return page("%s club" % rng.choice(TOPICS).title(), body), False, False


def feedback(i):
    body = ('<form action="feedback.pl" method=post>\n'
            '<input type="text" name="subject">\n'
            '<textarea name="message">tell us what you think</textarea>\n'
            '<input type="submit" name="send" value="Send feedback">\n</form>\n')
    return page("Feedback", para(1) + body), False, False


def poll(i):
    topic = rng.choice(TOPICS)
    body = ('<form action="vote.cgi" method=post>\n'
            '<input type="radio" name="vote" value="yes" checked> yes\n'
            '<input type="radio" name="vote" value="no"> no\n'
            '<input type="radio" name="vote" value="undecided"> undecided\n'
            '<input type="submit" name="cast" value="Vote">\n</form>\n')
    return page("Poll: more %s content?" % topic, para(1) + body), False, False


def upload(i):
    body = ('<form action="upload.cgi" method=post>\n'
            '<input type="text" name="title">\n'
            '<input type="file" name="upload">\n'
            '<input type="submit" name="u" value="Upload">\n</form>\n')
    return page("Share a photo", para(1) + body), False, False


def multi_form_unsuitable(i):
    body = (
        '<form action="find.cgi" method=get><input type="text" name="q">'
        '<input type="submit" name="s" value="Go"></form>\n' + para() +
        '\n<form action="auth.cgi" method=post>\n'
        '<input type="text" name="username">\n<input type="password" name="password">\n'
        '<input type="submit" name="log" value="Log in">\n</form>\n'
    )
    return page("Portal", body), False, False


ARCHETYPES = (
    [newsletter] * 17 + [fig_newsletter] +
    [malformed] * 6 +
    [default_text] * 4 +
    [multi_form_suitable] * 5 +
    [contact] * 4 +
    [signup] * 3 +
    [article] * 10 +
    [search_only] * 8 +
    [login] * 8 +
    [captcha_guarded] * 6 +
    [hidden_email_only] * 5 +
    [mailto_only] * 4 +
    [feedback] * 6 +
    [poll] * 5 +
    [upload] * 4 +
    [multi_form_unsuitable] * 4
)
assert len(ARCHETYPES) == 100


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for old in OUT.glob("*.html"):
        old.unlink()

    order = list(range(100))
    rng.shuffle(order)

    rows = []
    for site_no, arche_idx in enumerate(order, start=1):
        make = ARCHETYPES[arche_idx]
        html, has_captcha, suitable = make(arche_idx)
        name = "site%03d.html" % site_no
        (OUT / name).write_text(html)
        rows.append((name, has_captcha, suitable))

    with open(OUT / "labels.tsv", "w") as fh:
        fh.write("page\tcaptcha\tsuitable\n")
        for name, cap, suit in rows:
            fh.write("%s\t%d\t%d\n" % (name, int(cap), int(suit)))

    n_suit = sum(1 for _, _, s in rows if s)
    print("wrote %d pages, %d suitable" % (len(rows), n_suit))
    assert n_suit == 40


if __name__ == "__main__":
    main()
