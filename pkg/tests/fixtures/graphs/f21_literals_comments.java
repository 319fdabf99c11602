// leading comment
public boolean matches(String text) {
    /* block comment */
    boolean hit = text.equals("yes") || text.equals('y' + "");
    return hit && true;
}
