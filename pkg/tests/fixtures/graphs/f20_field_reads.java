public int area(Rect rect) {
    int w = rect.width;
    int h = rect.height;
    int area = multiply(w, rect.height) + h;
    return area;
}
